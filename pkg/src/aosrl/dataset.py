"""Experience datasets: collection, expert/random mixing, binary files, minibatches.

File layout (all little-endian)::

    b"AOSDATA\\0"  | u32 version | u32 header length | JSON header
    N records of (2F + 3) float64: s[F], n, m, u, s_next[F]
    8-byte BLAKE2b digest of everything above
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

MAGIC = b"AOSDATA\x00"
VERSION = 1
ENCODER = "c/C+onehot(y)+std-log10-amps/v1"


class DatasetIOError(IOError):
    pass


class DatasetFormatError(DatasetIOError):
    pass


class DatasetVersionError(DatasetIOError):
    pass


class DatasetTruncatedError(DatasetIOError):
    pass


class DatasetChecksumError(DatasetIOError):
    pass


class ExperienceTuple(NamedTuple):
    s_features: np.ndarray
    action: tuple[int, int]
    utility: float
    s_next_features: np.ndarray


@dataclass
class Dataset:
    header: dict
    s: np.ndarray         # (N, F)
    a: np.ndarray         # (N,) action index, 0 = idle, k = relay k
    u: np.ndarray         # (N,)
    s2: np.ndarray        # (N, F)
    _checked: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.int64)
        width = self.header.get("feature_dim") or -1
        self.s = np.asarray(self.s, dtype=np.float64).reshape(len(self.a), width)
        self.s2 = np.asarray(self.s2, dtype=np.float64).reshape(len(self.a), width)
        self.u = np.asarray(self.u, dtype=np.float64)
        n = len(self.a)
        if not (len(self.u) == n == self.s.shape[0] == self.s2.shape[0]):
            raise ValueError("record arrays differ in length")
        F = self.header.get("feature_dim")
        if n and F is not None and (self.s.shape[1] != F or self.s2.shape[1] != F):
            raise ValueError("feature length does not match header")
        if n and (np.any(self.u <= 0) or np.any(self.u > 1)):
            raise ValueError("utilities must lie in (0, 1]")
        self.header["count"] = n

    def __len__(self) -> int:
        return len(self.a)

    def __getitem__(self, i) -> ExperienceTuple:
        a = int(self.a[i])
        return ExperienceTuple(self.s[i], (0, 0) if a == 0 else (1, a), float(self.u[i]),
                               self.s2[i])

    def batch(self, idx):
        return self.s[idx], self.a[idx], self.u[idx], self.s2[idx]

    @property
    def feature_dim(self) -> int:
        return self.s.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.header == other.header and self.a.tobytes() == other.a.tobytes()
                and self.u.tobytes() == other.u.tobytes()
                and self.s.tobytes() == other.s.tobytes()
                and self.s2.tobytes() == other.s2.tobytes())


def empty_dataset(header: dict, feature_dim: int) -> Dataset:
    h = dict(header, feature_dim=feature_dim)
    return Dataset(h, np.zeros((0, feature_dim)), np.zeros(0, np.int64), np.zeros(0),
                   np.zeros((0, feature_dim)))


def make_header(env, policy_id: str, seed: int, xi: float | None = None) -> dict:
    cfg = env.cfg
    return {
        "K": cfg.K, "I": cfg.radio.I, "num_states": cfg.process.num_states,
        "chi": cfg.process.chi, "varphi": cfg.process.varphi,
        "feature_dim": cfg.feature_dim, "encoder": ENCODER,
        "scaler": {"mean": list(env.scaler.mean), "scale": list(env.scaler.scale)},
        "policy": policy_id, "seed": seed, "xi": xi,
    }


def collect(env, policy, count: int, rng: np.random.Generator, policy_id: str = "unknown",
            seed: int = 0, xi: float | None = None) -> Dataset:
    """Roll ``env`` for ``count`` consecutive slots under ``policy``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    F = env.feature_dim
    s = np.empty((count, F))
    s2 = np.empty((count, F))
    a = np.empty(count, np.int64)
    u = np.empty(count)
    x = env.features()
    for i in range(count):
        act = policy.act(x, rng)
        r, _ = env.step(act)
        x2 = env.features()
        s[i], a[i], u[i], s2[i] = x, act, r, x2
        x = x2
    return Dataset(make_header(env, policy_id, seed, xi), s, a, u, s2)


_COMPAT_KEYS = ("K", "I", "num_states", "feature_dim", "encoder")


def mix(expert: Dataset, random: Dataset, xi: float, rng: np.random.Generator,
        size: int | None = None) -> Dataset:
    """floor(xi * N) expert records plus N - floor(xi * N) random ones, shuffled.

    N defaults to the smaller of the two inputs.
    """
    if not 0 <= xi <= 1:
        raise ValueError("xi must lie in [0, 1]")
    if expert.feature_dim != random.feature_dim:
        raise ValueError(
            f"incompatible feature lengths {expert.feature_dim} vs {random.feature_dim}")
    for key in _COMPAT_KEYS:
        if expert.header.get(key) != random.header.get(key):
            raise ValueError(f"incompatible dataset headers: {key} differs")
    N = min(len(expert), len(random)) if size is None else size
    n_exp = int(np.floor(xi * N))
    n_rnd = N - n_exp
    if n_exp > len(expert) or n_rnd > len(random):
        raise ValueError(f"cannot draw {n_exp} expert + {n_rnd} random records")
    ie = np.sort(rng.choice(len(expert), n_exp, replace=False))
    ir = np.sort(rng.choice(len(random), n_rnd, replace=False))
    s = np.concatenate([expert.s[ie], random.s[ir]])
    a = np.concatenate([expert.a[ie], random.a[ir]])
    u = np.concatenate([expert.u[ie], random.u[ir]])
    s2 = np.concatenate([expert.s2[ie], random.s2[ir]])
    perm = rng.permutation(N)
    header = dict(expert.header)
    header.update(policy=f"mix({expert.header.get('policy')},{random.header.get('policy')})",
                  xi=xi, expert_count=n_exp)
    return Dataset(header, s[perm], a[perm], u[perm], s2[perm])


def sample_minibatch(dataset: Dataset, O: int, rng: np.random.Generator) -> np.ndarray:
    """O distinct indices, uniform without replacement."""
    if O > len(dataset):
        raise ValueError(f"minibatch size {O} exceeds dataset size {len(dataset)}")
    return rng.choice(len(dataset), O, replace=False)


# ---------------------------------------------------------------------------
# Binary I/O

def _digest(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


def to_bytes(ds: Dataset) -> bytes:
    header = dict(ds.header, count=len(ds), feature_dim=ds.feature_dim)
    blob = json.dumps(header, sort_keys=True).encode()
    n = ds.a.astype(np.float64) > 0
    rec = np.column_stack([ds.s, n.astype(np.float64), ds.a.astype(np.float64), ds.u, ds.s2])
    body = (MAGIC + struct.pack("<II", VERSION, len(blob)) + blob
            + np.ascontiguousarray(rec, dtype="<f8").tobytes())
    return body + _digest(body)


def from_bytes(raw: bytes, name: str = "<bytes>") -> Dataset:
    if len(raw) < 16:
        raise DatasetTruncatedError(f"{name}: file too short")
    if raw[:8] != MAGIC:
        raise DatasetFormatError(f"{name}: bad magic bytes")
    version, hlen = struct.unpack("<II", raw[8:16])
    if version != VERSION:
        raise DatasetVersionError(f"{name}: version {version}, expected {VERSION}")
    if len(raw) < 16 + hlen + 8:
        raise DatasetTruncatedError(f"{name}: header cut short")
    try:
        header = json.loads(raw[16:16 + hlen].decode())
        count, F = int(header["count"]), int(header["feature_dim"])
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        if _digest(raw[:-8]) != raw[-8:]:
            raise DatasetChecksumError(f"{name}: checksum mismatch") from exc
        raise DatasetFormatError(f"{name}: unreadable header") from exc
    width = 2 * F + 3
    expected = 16 + hlen + count * width * 8 + 8
    if len(raw) < expected:
        raise DatasetTruncatedError(f"{name}: {len(raw)} bytes, expected {expected}")
    if len(raw) > expected:
        raise DatasetFormatError(f"{name}: {len(raw) - expected} trailing bytes")
    if _digest(raw[:-8]) != raw[-8:]:
        raise DatasetChecksumError(f"{name}: checksum mismatch")
    rec = np.frombuffer(raw, dtype="<f8", count=count * width, offset=16 + hlen)
    rec = rec.reshape(count, width).astype(np.float64)
    return Dataset(header, rec[:, :F].copy(), rec[:, F + 1].astype(np.int64),
                   rec[:, F + 2].copy(), rec[:, F + 3:].copy())


def save(ds: Dataset, path) -> None:
    Path(path).write_bytes(to_bytes(ds))


def load(path) -> Dataset:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DatasetIOError(f"cannot read {path}: {exc}") from exc
    return from_bytes(raw, str(path))
