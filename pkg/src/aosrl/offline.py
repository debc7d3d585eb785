"""Offline conservative deep actor-critic trained purely from a static dataset.

Per iteration a minibatch is drawn, the actor ascends the entropy-augmented
expected Q, and the critic descends the TD loss plus the softmax-value and
margin-ranking penalties.  The trainer never holds an environment handle;
evaluation is delegated to an optional hook.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import OfflineConfig
from .dataset import Dataset, sample_minibatch
from .neural import (AdamState, MlpParams, TrainingError, adam_update, backprop,
                     forward, init_params, log_softmax)


class ConfigurationError(ValueError):
    pass


@dataclass
class OfflineTrainer:
    actor: MlpParams
    actor_opt: AdamState
    critic: MlpParams
    critic_opt: AdamState
    target: MlpParams
    gamma: float = 0.9
    alpha: float = 1e-4
    rho: float = 5e-4
    nu: float = 1.0
    batch_size: int = 1000
    target_reset: int = 10
    it: int = 0

    def __post_init__(self):
        if self.rho < 0 or self.nu < 0 or self.batch_size < 1:
            raise ValueError("need rho >= 0, nu >= 0, batch_size >= 1")


def make_offline_trainer(n_in: int, n_actions: int, cfg: OfflineConfig,
                         rng: np.random.Generator) -> OfflineTrainer:
    net = cfg.net
    actor = init_params(n_in, net.hidden, n_actions, rng)
    critic = init_params(n_in, net.hidden, n_actions, rng)
    return OfflineTrainer(
        actor, AdamState.for_params(actor, net.lr_actor, net.beta1, net.beta2, net.eps_hat),
        critic, AdamState.for_params(critic, net.lr_critic, net.beta1, net.beta2, net.eps_hat),
        critic.copy(), cfg.gamma, cfg.alpha, cfg.rho, cfg.nu, cfg.batch_size, cfg.target_reset)


def td_target(u, s2, actor: MlpParams, target: MlpParams, gamma: float) -> np.ndarray:
    """(1-gamma) u + gamma * sum_a' pi(s',a') Q_target(s',a'), over all actions."""
    pi = np.exp(log_softmax(forward(actor, s2)[0]))
    q_next = forward(target, s2)[0]
    return (1 - gamma) * np.asarray(u) + gamma * np.sum(pi * q_next, axis=-1)


def penalty_terms(q: np.ndarray, a: np.ndarray, rho: float, nu: float):
    """Per-row penalty rho*[logsumexp(q) + sum_{a'!=a} relu(nu + q_a' - q_a)] and d/dq."""
    q = np.atleast_2d(q)
    a = np.atleast_1d(a)
    rows = np.arange(q.shape[0])
    qmax = q.max(axis=1, keepdims=True)
    e = np.exp(q - qmax)
    lse = qmax[:, 0] + np.log(e.sum(axis=1))
    soft = e / e.sum(axis=1, keepdims=True)
    hinge = nu + q - q[rows, a][:, None]
    hinge[rows, a] = 0.0
    active = hinge > 0
    value = rho * (lse + np.where(active, hinge, 0.0).sum(axis=1))
    grad = soft + active
    grad[rows, a] -= active.sum(axis=1)
    return value, rho * grad


def conservative_penalty(q_row, a_data: int, rho: float, nu: float) -> float:
    value, _ = penalty_terms(np.asarray(q_row, dtype=float), a_data, rho, nu)
    return float(value[0])


def critic_loss_grad(critic: MlpParams, target: MlpParams, actor: MlpParams, batch,
                     gamma: float, rho: float, nu: float):
    """Mean 0.5*(Q(s,a) - y)^2 + mean penalty; y is held constant.

    Returns (loss, grads, info) with info = (td_part, penalty_mean).
    """
    s, a, u, s2 = batch
    y = td_target(u, s2, actor, target, gamma)
    q, cache = forward(critic, s)
    B = q.shape[0]
    rows = np.arange(B)
    err = q[rows, a] - y
    pen, pen_grad = penalty_terms(q, a, rho, nu)
    td_part = 0.5 * float(np.mean(err * err))
    pen_mean = float(np.mean(pen))
    up = pen_grad / B
    up[rows, a] += err / B
    return td_part + pen_mean, backprop(critic, cache, up), (td_part, pen_mean)


def actor_objective_grad(actor: MlpParams, critic: MlpParams, s, alpha: float):
    """Mean over states of sum_a pi (Q - alpha ln pi), with Q held constant."""
    q = forward(critic, s)[0]
    logits, cache = forward(actor, s)
    logp = log_softmax(logits)
    pi = np.exp(logp)
    inner = q - alpha * logp
    per_state = np.sum(pi * inner, axis=-1)
    up = pi * (inner - per_state[..., None])
    B = 1 if np.ndim(s) == 1 else s.shape[0]
    return float(np.mean(per_state)), backprop(actor, cache, up / B)


def offline_iteration(tr: OfflineTrainer, batch) -> dict:
    s = batch[0]
    F, a_grads = actor_objective_grad(tr.actor, tr.critic, s, tr.alpha)
    loss, c_grads, (td_part, pen_mean) = critic_loss_grad(
        tr.critic, tr.target, tr.actor, batch, tr.gamma, tr.rho, tr.nu)
    if not np.isfinite(loss) or not np.isfinite(F):
        raise TrainingError(f"non-finite offline loss at iteration {tr.it}: loss={loss}, F={F}")
    adam_update(tr.actor, a_grads, tr.actor_opt, maximize=True)
    adam_update(tr.critic, c_grads, tr.critic_opt, maximize=False)
    tr.it += 1
    if tr.it % tr.target_reset == 0:
        tr.target = tr.critic.copy()
    return {"iter": tr.it, "critic_loss": loss, "td_loss": td_part,
            "penalty_mean": pen_mean, "actor_objective": F}


def run_offline(dataset: Dataset, tr: OfflineTrainer, num_iters: int,
                rng: np.random.Generator, eval_hook=None, eval_every: int = 0) -> list[dict]:
    """Algorithm loop; ``eval_hook(actor, iteration) -> mean utility`` is optional."""
    if len(dataset) < tr.batch_size:
        raise ConfigurationError(
            f"dataset has {len(dataset)} tuples, fewer than batch size {tr.batch_size}")
    rows = []
    for _ in range(num_iters):
        idx = sample_minibatch(dataset, tr.batch_size, rng)
        row = offline_iteration(tr, dataset.batch(idx))
        if eval_hook is not None and eval_every and tr.it % eval_every == 0:
            row["eval_mean_u"] = eval_hook(tr.actor, tr.it)
        rows.append(row)
    return rows
