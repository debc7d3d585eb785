"""Exact finite-MDP oracle: Bellman operator, matrix policy evaluation, penalised
fitted Q-evaluation and the pessimism checks run against it.

Q and V follow the (1 - gamma)-normalised convention used by the learners, so
with utilities in (0, 1] every exact value also lies in (0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class TabularNumericalError(ArithmeticError):
    pass


@dataclass
class TabularMdp:
    kernel: np.ndarray      # (S, A, S) transition probabilities
    u: np.ndarray           # (S, A) utilities in (0, 1]
    gamma: float = 0.9

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        S, A = self.u.shape
        if self.kernel.shape != (S, A, S):
            raise ValueError(f"kernel shape {self.kernel.shape} does not match utilities {S}x{A}")
        if np.any(self.kernel < 0) or np.max(np.abs(self.kernel.sum(axis=2) - 1)) > 1e-12:
            raise ValueError("kernel rows must be distributions")
        if np.any(self.u <= 0) or np.any(self.u > 1):
            raise ValueError("utilities must lie in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")

    @property
    def S(self) -> int:
        return self.u.shape[0]

    @property
    def A(self) -> int:
        return self.u.shape[1]


def random_mdp(S: int, A: int, rng: np.random.Generator, gamma: float = 0.9) -> TabularMdp:
    """Dense Dirichlet kernel, utilities uniform on [0.05, 1]."""
    kernel = rng.dirichlet(np.ones(S), size=(S, A))
    kernel /= kernel.sum(axis=2, keepdims=True)
    return TabularMdp(kernel, rng.uniform(0.05, 1.0, size=(S, A)), gamma)


def random_policy_matrix(S: int, A: int, rng: np.random.Generator) -> np.ndarray:
    return rng.dirichlet(np.ones(A), size=S)


def _check_policy(pi: np.ndarray, mdp: TabularMdp) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (mdp.S, mdp.A):
        raise ValueError(f"policy shape {pi.shape}, expected {(mdp.S, mdp.A)}")
    return pi


def bellman_apply(Q: np.ndarray, pi: np.ndarray, mdp: TabularMdp) -> np.ndarray:
    pi = _check_policy(pi, mdp)
    if np.shape(Q) != (mdp.S, mdp.A):
        raise ValueError("Q shape does not match the MDP")
    v_next = np.sum(pi * Q, axis=1)
    return (1 - mdp.gamma) * mdp.u + mdp.gamma * mdp.kernel @ v_next


def state_kernel(pi: np.ndarray, mdp: TabularMdp) -> np.ndarray:
    """Phi[s, s'] = sum_a pi(s, a) P(s' | s, a)."""
    return np.einsum("sa,sat->st", _check_policy(pi, mdp), mdp.kernel)


def exact_policy_value(pi: np.ndarray, mdp: TabularMdp) -> np.ndarray:
    """V = (1 - gamma) (I - gamma Phi)^-1 u_pi by a direct linear solve."""
    pi = _check_policy(pi, mdp)
    M = np.eye(mdp.S) - mdp.gamma * state_kernel(pi, mdp)
    u_pi = np.sum(pi * mdp.u, axis=1)
    try:
        V = np.linalg.solve(M, (1 - mdp.gamma) * u_pi)
    except np.linalg.LinAlgError as exc:
        raise TabularNumericalError("singular policy-evaluation system") from exc
    if not np.all(np.isfinite(V)):
        raise TabularNumericalError("non-finite policy value")
    return V


def exact_q(pi: np.ndarray, mdp: TabularMdp) -> np.ndarray:
    V = exact_policy_value(pi, mdp)
    return (1 - mdp.gamma) * mdp.u + mdp.gamma * mdp.kernel @ V


def iterative_policy_value(pi: np.ndarray, mdp: TabularMdp, tol: float = 1e-14,
                           max_iter: int = 100_000) -> np.ndarray:
    """Repeated Bellman backups on V; independent of the linear solve."""
    pi = _check_policy(pi, mdp)
    Phi = state_kernel(pi, mdp)
    u_pi = (1 - mdp.gamma) * np.sum(pi * mdp.u, axis=1)
    V = np.zeros(mdp.S)
    for _ in range(max_iter):
        V_new = u_pi + mdp.gamma * Phi @ V
        if np.max(np.abs(V_new - V)) < tol:
            return V_new
        V = V_new
    raise TabularNumericalError("iterative evaluation did not converge")


# ---------------------------------------------------------------------------
# Tabular datasets

@dataclass
class TabularDataset:
    S: int
    A: int
    s: np.ndarray
    a: np.ndarray
    u: np.ndarray
    s2: np.ndarray

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=np.int64)
        self.a = np.asarray(self.a, dtype=np.int64)
        self.u = np.asarray(self.u, dtype=float)
        self.s2 = np.asarray(self.s2, dtype=np.int64)
        if not (len(self.s) == len(self.a) == len(self.u) == len(self.s2)):
            raise ValueError("record arrays differ in length")

    def __len__(self) -> int:
        return len(self.s)


def rollout_dataset(mdp: TabularMdp, behavior: np.ndarray, count: int,
                    rng: np.random.Generator, start: int | None = None) -> TabularDataset:
    behavior = _check_policy(behavior, mdp)
    s = np.empty(count, np.int64)
    a = np.empty(count, np.int64)
    s2 = np.empty(count, np.int64)
    cur = int(rng.integers(mdp.S)) if start is None else start
    for i in range(count):
        act = int(rng.choice(mdp.A, p=behavior[cur]))
        nxt = int(rng.choice(mdp.S, p=mdp.kernel[cur, act]))
        s[i], a[i], s2[i] = cur, act, nxt
        cur = nxt
    return TabularDataset(mdp.S, mdp.A, s, a, mdp.u[s, a], s2)


def empirical_policy(ds: TabularDataset):
    """(pi_D, counts, seen) where unseen states get uniform rows and seen[s] is False."""
    counts = np.zeros((ds.S, ds.A), np.int64)
    np.add.at(counts, (ds.s, ds.a), 1)
    per_state = counts.sum(axis=1)
    seen = per_state > 0
    pi_D = np.full((ds.S, ds.A), 1.0 / ds.A)
    pi_D[seen] = counts[seen] / per_state[seen, None]
    return pi_D, counts, seen


def empirical_model(ds: TabularDataset):
    """Empirical kernel and mean utility on visited pairs (zeros elsewhere)."""
    counts = np.zeros((ds.S, ds.A), np.int64)
    np.add.at(counts, (ds.s, ds.a), 1)
    trans = np.zeros((ds.S, ds.A, ds.S))
    np.add.at(trans, (ds.s, ds.a, ds.s2), 1.0)
    usum = np.zeros((ds.S, ds.A))
    np.add.at(usum, (ds.s, ds.a), ds.u)
    nz = counts > 0
    trans[nz] /= counts[nz][:, None]
    usum[nz] /= counts[nz]
    return trans, usum, counts


# ---------------------------------------------------------------------------
# Penalty ingredients

def omega_star(pi_D_row, q_row) -> np.ndarray:
    """pi_D * exp(Q - 1); zero wherever pi_D is zero."""
    pi_D_row = np.asarray(pi_D_row, dtype=float)
    return pi_D_row * np.exp(np.asarray(q_row, dtype=float) - 1.0)


def rho_lower_bound(psi: float, counts, pi_D, omega) -> float:
    counts = np.asarray(counts, dtype=float)
    conc = psi / np.sqrt(np.maximum(1.0, counts))
    return float(np.max(conc * np.asarray(pi_D, dtype=float) / (np.asarray(omega) + 1.0)))


def hoeffding_psi(S: int, A: int, eps: float) -> float:
    """Union-bound Hoeffding radius for [0, 1]-valued targets over all S*A pairs."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return math.sqrt(math.log(2 * S * A / eps) / 2)


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, 1 / (1 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1 + np.exp(-np.abs(x))))


def ranking_policy(q_row) -> np.ndarray:
    """varpi(a) = prod over a' != a of sigmoid(q_a - q_a'); unnormalised scores."""
    q = np.asarray(q_row, dtype=float)
    diff = sigmoid(q[:, None] - q[None, :])
    np.fill_diagonal(diff, 1.0)
    return np.prod(diff, axis=1)


def margin_term(q_row, a: int, nu: float) -> float:
    """z = sum over a' != a of max(0, nu + q_a' - q_a)."""
    q = np.asarray(q_row, dtype=float)
    h = np.maximum(0.0, nu + q - q[a])
    h[a] = 0.0
    return float(h.sum())


def minimize_margin(q_row, a: int, nu: float, step: float = 0.05,
                    max_steps: int = 100_000) -> np.ndarray:
    """Subgradient descent on the margin term until it is exactly zero."""
    q = np.array(q_row, dtype=float)
    for _ in range(max_steps):
        h = nu + q - q[a]
        h[a] = 0.0
        active = h > 0
        if not active.any():
            return q
        q[active] -= step
        q[a] += step * active.sum()
    raise TabularNumericalError("margin minimisation did not reach zero")


# ---------------------------------------------------------------------------
# Penalised fitted Q-evaluation

def tabular_offline_fqi(ds: TabularDataset, pi_target: np.ndarray, rho: float, nu: float,
                        mdp: TabularMdp, mode: str = "known", tol: float = 1e-10,
                        max_iter: int = 20_000) -> np.ndarray:
    """Fixed point of the penalised backup restricted to a dataset.

    Dataset pairs: Q(s,a) = T Q(s,a) - rho (omega*(s,a) + 1) / pi_D(s,a), with
    omega* recomputed from the current iterate.  Pairs of a visited state whose
    action never occurs in the data are pushed nu below the smallest dataset
    value of that state (only when rho > 0).  States absent from the data are
    backed up with the true model, so their values follow the exact ones.

    ``mode="known"`` backs dataset pairs up with the true kernel and
    utilities; ``mode="sampled"`` uses the empirical ones.
    """
    if len(ds) == 0:
        raise ValueError("dataset is empty")
    if mode not in ("known", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    if rho < 0 or nu < 0:
        raise ValueError("rho and nu must be non-negative")
    pi = _check_policy(pi_target, mdp)
    pi_D, counts, seen = empirical_policy(ds)
    in_data = counts > 0
    ood = seen[:, None] & ~in_data
    kernel, util = mdp.kernel, mdp.u
    if mode == "sampled":
        emp_k, emp_u, _ = empirical_model(ds)
        kernel = np.where(in_data[:, :, None], emp_k, mdp.kernel)
        util = np.where(in_data, emp_u, mdp.u)
    g = mdp.gamma
    safe_pi_D = np.where(in_data, pi_D, 1.0)
    Q = np.zeros((mdp.S, mdp.A))
    for _ in range(max_iter):
        backup = (1 - g) * util + g * kernel @ np.sum(pi * Q, axis=1)
        new = backup.copy()
        if rho > 0:
            om = omega_star(pi_D, Q)
            new[in_data] -= rho * (om[in_data] + 1.0) / safe_pi_D[in_data]
            floor = np.where(in_data, new, np.inf).min(axis=1)
            cap = np.broadcast_to(floor[:, None] - nu, Q.shape)
            new[ood] = np.minimum(backup[ood], cap[ood])
        if not np.all(np.isfinite(new)):
            raise TabularNumericalError("non-finite Q iterate")
        if np.max(np.abs(new - Q)) < tol:
            return new
        Q = new
    raise TabularNumericalError(f"fitted Q-evaluation did not converge in {max_iter} iterations")


# ---------------------------------------------------------------------------
# Lower-bound check

def verify_value_lower_bound(mdp: TabularMdp, pi_target: np.ndarray, datasets,
                             rho: float | None, mode: str = "known", nu: float = 1.0,
                             eps: float = 0.05, seeds=None) -> dict:
    """Check V_hat(s) <= V(s; pi) on every dataset state of every dataset.

    ``rho=None`` picks the smallest admissible value per dataset; an explicit
    rho below the admissible value is rejected.  ``pi_target`` is either one
    policy matrix or one per dataset.
    """
    datasets = list(datasets)
    seeds = list(range(len(datasets))) if seeds is None else list(seeds)
    targets = np.asarray(pi_target, dtype=float)
    if targets.ndim == 2:
        targets = np.broadcast_to(targets, (len(datasets),) + targets.shape)
    psi = 0.0 if mode == "known" else hoeffding_psi(mdp.S, mdp.A, eps)
    per_seed = []
    violations = checks = 0
    rho_used_max = rho_bound_max = 0.0
    for seed, ds, pi in zip(seeds, datasets, targets):
        pi_D, counts, seen = empirical_policy(ds)
        bound = rho_lower_bound(psi, counts, pi_D, np.zeros_like(pi_D))
        r = bound if rho is None else rho
        if r < bound:
            raise ValueError(f"rho={r} below the admissible value {bound}")
        Q_hat = tabular_offline_fqi(ds, pi, r, nu, mdp, mode)
        V_hat = np.sum(pi * Q_hat, axis=1)
        V = exact_policy_value(pi, mdp)
        slack = V - V_hat
        bad = int(np.sum(slack[seen] < 0))
        violations += bad
        checks += int(seen.sum())
        rho_used_max = max(rho_used_max, r)
        rho_bound_max = max(rho_bound_max, bound)
        per_seed.append({"seed": int(seed), "V": V.tolist(), "V_hat": V_hat.tolist(),
                         "slack": slack.tolist(), "dataset_states": np.flatnonzero(seen).tolist(),
                         "rho": r, "rho_bound": bound, "violations": bad})
    return {"mode": mode, "psi": psi, "eps": eps if mode == "sampled" else None, "nu": nu,
            "psi_rule": "hoeffding-union" if mode == "sampled" else "exact-model",
            "rho_used": rho_used_max, "rho_bound": rho_bound_max,
            "violations": violations, "checks": checks,
            "violation_rate": violations / checks if checks else 0.0, "per_seed": per_seed}


def sparse_behavior(S: int, A: int, rng: np.random.Generator, drop: float = 0.5) -> np.ndarray:
    """Random behaviour policy that never takes some actions in some states."""
    beh = rng.dirichlet(np.ones(A), size=S)
    mask = rng.random((S, A)) < drop
    for s in range(S):
        if mask[s].all():
            mask[s, rng.integers(A)] = False
    beh = np.where(mask, 0.0, beh)
    return beh / beh.sum(axis=1, keepdims=True)


def lower_bound_experiment(seeds, mode: str = "known", rho: float | None = 5e-4,
                           S: int = 6, A: int = 3, count: int = 300, nu: float = 1.0,
                           eps: float = 0.05, mdp_seed: int = 2024,
                           gamma: float = 0.9) -> dict:
    """Fixed MDP; each seed draws its own behaviour policy, target policy and data."""
    mdp = random_mdp(S, A, np.random.default_rng(mdp_seed), gamma)
    datasets, targets = [], []
    seeds = list(seeds)
    for seed in seeds:
        rng = np.random.default_rng([mdp_seed, seed])
        beh = sparse_behavior(S, A, rng)
        targets.append(random_policy_matrix(S, A, rng))
        datasets.append(rollout_dataset(mdp, beh, count, rng))
    report = verify_value_lower_bound(mdp, np.stack(targets), datasets, rho, mode, nu, eps, seeds)
    report.update(S=S, A=A, count=count, mdp_seed=mdp_seed, gamma=gamma)
    return report


# ---------------------------------------------------------------------------
# A tiny environment with the learner-facing interface

class TabularEnv:
    """One-hot features over a TabularMdp; matches the AosEnv step interface."""

    def __init__(self, mdp: TabularMdp, seed: int = 0, start: int = 0):
        self.mdp = mdp
        self.num_actions = mdp.A
        self.feature_dim = mdp.S
        self.rng = np.random.default_rng(seed)
        self.state = start

    @property
    def aos(self) -> int:
        return self.state

    def features(self) -> np.ndarray:
        x = np.zeros(self.mdp.S)
        x[self.state] = 1.0
        return x

    def step(self, action_index: int):
        u = float(self.mdp.u[self.state, action_index])
        self.state = int(self.rng.choice(self.mdp.S, p=self.mdp.kernel[self.state, action_index]))
        return u, None
