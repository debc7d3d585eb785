"""One-hidden-layer ReLU MLPs with hand-written backprop and Adam.

Inputs may be a single feature vector (shape (in,)) or a batch (B, in);
outputs follow the same leading shape.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LOG_FLOOR = 1e-12
_MAGIC = b"AOSNET01"


class TrainingError(FloatingPointError):
    """Raised when a loss or gradient becomes non-finite."""


@dataclass
class MlpParams:
    W1: np.ndarray   # (hidden, in)
    b1: np.ndarray   # (hidden,)
    W2: np.ndarray   # (out, hidden)
    b2: np.ndarray   # (out,)

    names = ("W1", "b1", "W2", "b2")

    def arrays(self) -> tuple[np.ndarray, ...]:
        return self.W1, self.b1, self.W2, self.b2

    def copy(self) -> "MlpParams":
        return MlpParams(*(a.copy() for a in self.arrays()))

    def zeros_like(self) -> "MlpParams":
        return MlpParams(*(np.zeros_like(a) for a in self.arrays()))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    @property
    def shape(self) -> tuple[int, int, int]:
        """(in, hidden, out)"""
        return self.W1.shape[1], self.W1.shape[0], self.W2.shape[0]

    def __eq__(self, other):
        return isinstance(other, MlpParams) and all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.arrays(), other.arrays()))


def init_params(n_in: int, hidden: int, n_out: int, rng: np.random.Generator) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    lim1 = np.sqrt(6.0 / (n_in + hidden))
    lim2 = np.sqrt(6.0 / (hidden + n_out))
    return MlpParams(
        rng.uniform(-lim1, lim1, (hidden, n_in)),
        np.zeros(hidden),
        rng.uniform(-lim2, lim2, (n_out, hidden)),
        np.zeros(n_out),
    )


def forward(params: MlpParams, x: np.ndarray):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.W1.shape[1]:
        raise ValueError(f"feature length {x.shape[-1]} != input dim {params.W1.shape[1]}")
    pre = x @ params.W1.T + params.b1
    h = np.maximum(pre, 0.0)
    out = h @ params.W2.T + params.b2
    return out, (x, pre, h)


def backprop(params: MlpParams, cache, upstream: np.ndarray) -> MlpParams:
    """Gradients of sum(out * upstream) with respect to every parameter."""
    x, pre, h = cache
    g = np.asarray(upstream, dtype=float)
    if g.ndim == 1:
        dW2 = np.outer(g, h)
        db2 = g.copy()
        dh = params.W2.T @ g
        dpre = dh * (pre > 0)
        return MlpParams(np.outer(dpre, x), dpre, dW2, db2)
    dW2 = g.T @ h
    db2 = g.sum(axis=0)
    dpre = (g @ params.W2) * (pre > 0)
    return MlpParams(dpre.T @ x, dpre.sum(axis=0), dW2, db2)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def actor_probs(params: MlpParams, x: np.ndarray) -> np.ndarray:
    logits, _ = forward(params, x)
    return softmax(logits)


def safe_log(p: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(p, LOG_FLOOR))


@dataclass
class AdamState:
    m: MlpParams
    v: MlpParams
    t: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8

    @classmethod
    def for_params(cls, params: MlpParams, lr=3e-4, beta1=0.9, beta2=0.999, eps_hat=1e-8):
        return cls(params.zeros_like(), params.zeros_like(), 0, lr, beta1, beta2, eps_hat)

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.t, self.lr, self.beta1,
                         self.beta2, self.eps_hat)


def adam_update(params: MlpParams, grads: MlpParams, state: AdamState,
                maximize: bool = False) -> MlpParams:
    """One bias-corrected Adam step, in place.  ``maximize`` ascends instead of descending."""
    for name, g in zip(MlpParams.names, grads.arrays()):
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in {name} at Adam step {state.t + 1}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    sign = 1.0 if maximize else -1.0
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p += sign * state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps_hat)
    return params


# ---------------------------------------------------------------------------
# Gradient checking

def numerical_grad(loss_fn, params: MlpParams, h: float = 1e-5) -> MlpParams:
    """Central finite differences of the scalar ``loss_fn(params)``."""
    out = params.zeros_like()
    for p, g in zip(params.arrays(), out.arrays()):
        flat_p, flat_g = p.reshape(-1), g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            fp = loss_fn(params)
            flat_p[i] = orig - h
            fm = loss_fn(params)
            flat_p[i] = orig
            flat_g[i] = (fp - fm) / (2 * h)
    return out


def max_rel_error(a: MlpParams, b: MlpParams, floor: float = 1e-8) -> float:
    fa, fb = a.flat(), b.flat()
    return float(np.max(np.abs(fa - fb) / np.maximum(np.abs(fa) + np.abs(fb), floor)))


# ---------------------------------------------------------------------------
# Checkpoints: magic, u64 header length, JSON header, little-endian float64 payload

def save_checkpoint(path, nets: dict[str, MlpParams], **meta) -> None:
    header = {"nets": [{"name": k, "shape": list(p.shape)} for k, p in nets.items()], **meta}
    blob = json.dumps(header, sort_keys=True).encode()
    payload = b"".join(
        np.ascontiguousarray(a, dtype="<f8").tobytes() for p in nets.values() for a in p.arrays())
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(payload)


def load_checkpoint(path) -> tuple[dict[str, MlpParams], dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise ValueError(f"{path}: not a network checkpoint")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + hlen].decode())
    data = np.frombuffer(raw, dtype="<f8", offset=16 + hlen)
    nets, pos = {}, 0
    for entry in header["nets"]:
        n_in, hidden, n_out = entry["shape"]
        arrays = []
        for shape in ((hidden, n_in), (hidden,), (n_out, hidden), (n_out,)):
            size = int(np.prod(shape))
            if pos + size > data.size:
                raise ValueError(f"{path}: truncated checkpoint")
            arrays.append(data[pos:pos + size].reshape(shape).astype(np.float64))
            pos += size
        nets[entry["name"]] = MlpParams(*arrays)
    if pos != data.size:
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    meta = {k: v for k, v in header.items() if k != "nets"}
    return nets, meta
