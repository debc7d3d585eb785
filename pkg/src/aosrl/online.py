"""On-policy entropy-augmented deep actor-critic trained by live interaction.

The critic is fitted with the SARSA-style TD error against a periodically
reset target critic; the actor follows the product-form update
grad[(Q(s,a) - alpha(1-gamma) ln pi(s,a)) * ln pi(s,a)], differentiating both
log-probability factors.  The critic descends the squared TD error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import OnlineConfig
from .neural import (AdamState, MlpParams, TrainingError, adam_update, backprop,
                     forward, init_params, log_softmax, safe_log, softmax)
from .policies import sample_index


@dataclass
class OnlineTrainer:
    actor: MlpParams
    actor_opt: AdamState
    critic: MlpParams
    critic_opt: AdamState
    target: MlpParams
    gamma: float = 0.9
    alpha: float = 1e-4
    target_reset: int = 100
    slot: int = 0

    def __post_init__(self):
        if not 0 <= self.gamma < 1 or self.alpha < 0:
            raise ValueError("need 0 <= gamma < 1 and alpha >= 0")
        if self.target.shape != self.critic.shape:
            raise ValueError("target critic shape differs from critic")


def make_online_trainer(n_in: int, n_actions: int, cfg: OnlineConfig,
                        rng: np.random.Generator) -> OnlineTrainer:
    net = cfg.net
    actor = init_params(n_in, net.hidden, n_actions, rng)
    critic = init_params(n_in, net.hidden, n_actions, rng)
    return OnlineTrainer(
        actor, AdamState.for_params(actor, net.lr_actor, net.beta1, net.beta2, net.eps_hat),
        critic, AdamState.for_params(critic, net.lr_critic, net.beta1, net.beta2, net.eps_hat),
        critic.copy(), cfg.gamma, cfg.alpha, cfg.target_reset)


def entropy_term(probs: np.ndarray) -> float:
    p = np.asarray(probs, dtype=float)
    return float(-np.sum(p * safe_log(p)))


def td_error(u, s, a, s2, a2, tr: OnlineTrainer) -> float:
    g, al = tr.gamma, tr.alpha
    q_next = forward(tr.target, s2)[0][a2]
    logp_next = log_softmax(forward(tr.actor, s2)[0])[a2]
    q = forward(tr.critic, s)[0][a]
    return float((1 - g) * u + g * (q_next - al * (1 - g) * logp_next) - q)


def critic_loss_grad(critic: MlpParams, target: MlpParams, actor: MlpParams,
                     transition, gamma: float, alpha: float):
    """Return (0.5 * delta**2, gradient w.r.t. critic, delta)."""
    s, a, u, s2, a2 = transition
    q_next = forward(target, s2)[0][a2]
    logp_next = log_softmax(forward(actor, s2)[0])[a2]
    out, cache = forward(critic, s)
    delta = (1 - gamma) * u + gamma * (q_next - alpha * (1 - gamma) * logp_next) - out[a]
    up = np.zeros_like(out)
    up[a] = -delta
    return 0.5 * delta * delta, backprop(critic, cache, up), float(delta)


def actor_objective_grad(actor: MlpParams, q_sa: float, s, a: int, gamma: float,
                         alpha: float):
    """Value and gradient of (Q(s,a) - alpha(1-gamma) ln pi) * ln pi, Q held fixed."""
    logits, cache = forward(actor, s)
    logp = log_softmax(logits)
    L = logp[a]
    k = alpha * (1 - gamma)
    value = (q_sa - k * L) * L
    onehot = np.zeros_like(logits)
    onehot[a] = 1.0
    up = (q_sa - 2 * k * L) * (onehot - np.exp(logp))
    return float(value), backprop(actor, cache, up)


def critic_step(transition, tr: OnlineTrainer) -> float:
    loss, grads, delta = critic_loss_grad(tr.critic, tr.target, tr.actor, transition,
                                          tr.gamma, tr.alpha)
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite TD loss at slot {tr.slot}: delta={delta}")
    adam_update(tr.critic, grads, tr.critic_opt, maximize=False)
    return delta


def actor_step(s, a: int, tr: OnlineTrainer) -> float:
    q_sa = forward(tr.critic, s)[0][a]
    value, grads = actor_objective_grad(tr.actor, q_sa, s, a, tr.gamma, tr.alpha)
    adam_update(tr.actor, grads, tr.actor_opt, maximize=True)
    return value


def learn_transition(tr: OnlineTrainer, transition) -> float:
    """Both updates from the same (theta^j, lambda^j), then the periodic target reset."""
    s, a = transition[0], transition[1]
    q_sa = forward(tr.critic, s)[0][a]
    _, a_grads = actor_objective_grad(tr.actor, q_sa, s, a, tr.gamma, tr.alpha)
    loss, c_grads, delta = critic_loss_grad(tr.critic, tr.target, tr.actor, transition,
                                            tr.gamma, tr.alpha)
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite TD loss at slot {tr.slot}: delta={delta}")
    adam_update(tr.actor, a_grads, tr.actor_opt, maximize=True)
    adam_update(tr.critic, c_grads, tr.critic_opt, maximize=False)
    tr.slot += 1
    if tr.slot % tr.target_reset == 0:
        tr.target = tr.critic.copy()
    return delta


def run_online(env, tr: OnlineTrainer, num_slots: int, rng: np.random.Generator,
               window: int = 1000, callback=None) -> list[dict]:
    """Observe -> act -> learn for ``num_slots`` slots; one metrics row per window."""
    rows: list[dict] = []
    if num_slots <= 0:
        return rows
    s = env.features().copy()
    a = sample_index(softmax(forward(tr.actor, s)[0]), rng)
    acc_u = acc_c = acc_e = 0.0
    n = 0
    for _ in range(num_slots):
        c = getattr(env, "aos", 0)
        u, info = env.step(a)
        s2 = env.features().copy()
        p2 = softmax(forward(tr.actor, s2)[0])
        a2 = sample_index(p2, rng)
        assert p2[a2] > 0.0  # next action drawn from the current actor
        learn_transition(tr, (s, a, u, s2, a2))
        acc_u += u
        acc_c += c
        acc_e += getattr(info, "energy", 0.0)
        n += 1
        if n == window:
            row = {"slot": tr.slot, "window_mean_u": acc_u / n, "window_mean_c": acc_c / n,
                   "window_mean_energy": acc_e / n}
            rows.append(row)
            if callback is not None:
                callback(row)
            acc_u = acc_c = acc_e = 0.0
            n = 0
        s, a = s2, a2
    return rows
