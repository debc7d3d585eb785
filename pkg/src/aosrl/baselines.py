"""Comparison schemes: uniform random, one-step A2C and discrete CQL.

A2C works with raw (unnormalised) returns and a state-value critic; it is the
generator of the expert data.  CQL fits Q with a max-backup TD loss plus
rho_cql * (logsumexp_a Q(s,a) - Q(s,a_data)) and acts greedily.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import A2CConfig, CQLConfig
from .dataset import Dataset, sample_minibatch
from .neural import (AdamState, MlpParams, TrainingError, adam_update, backprop,
                     forward, init_params, log_softmax)
from .policies import PolicyHandle, random_policy, random_policy_probs, sample_index

__all__ = ["random_policy", "random_policy_probs", "A2CTrainer", "make_a2c_trainer",
           "a2c_grads", "a2c_train", "CQLTrainer", "make_cql_trainer", "cql_loss_grad",
           "cql_train", "a2c_policy", "cql_policy"]


@dataclass
class A2CTrainer:
    actor: MlpParams
    actor_opt: AdamState
    critic: MlpParams        # state-value head, one output
    critic_opt: AdamState
    gamma: float = 0.9
    entropy_bonus: float = 0.01
    slot: int = 0


def make_a2c_trainer(n_in: int, n_actions: int, cfg: A2CConfig,
                     rng: np.random.Generator) -> A2CTrainer:
    net = cfg.net
    actor = init_params(n_in, net.hidden, n_actions, rng)
    critic = init_params(n_in, net.hidden, 1, rng)
    return A2CTrainer(
        actor, AdamState.for_params(actor, net.lr_actor, net.beta1, net.beta2, net.eps_hat),
        critic, AdamState.for_params(critic, net.lr_critic, net.beta1, net.beta2, net.eps_hat),
        cfg.gamma, cfg.entropy_bonus)


def a2c_grads(actor: MlpParams, critic: MlpParams, transition, gamma: float, ent: float):
    """Returns (actor objective, actor grads, critic loss, critic grads, advantage).

    Actor objective: delta * ln pi(a|s) + ent * H(pi(.|s)), delta held constant.
    Critic loss: 0.5 * delta^2 with the bootstrap V(s') held constant.
    """
    s, a, u, s2 = transition
    v2 = forward(critic, s2)[0][0]
    v, c_cache = forward(critic, s)
    delta = u + gamma * v2 - v[0]
    logits, a_cache = forward(actor, s)
    logp = log_softmax(logits)
    pi = np.exp(logp)
    H = -np.sum(pi * logp)
    objective = delta * logp[a] + ent * H
    up = -delta * pi
    up[a] += delta
    up += ent * (-pi * (logp + H))
    a_grads = backprop(actor, a_cache, up)
    c_grads = backprop(critic, c_cache, np.array([-delta]))
    return float(objective), a_grads, 0.5 * float(delta) ** 2, c_grads, float(delta)


def a2c_train(env, tr: A2CTrainer, num_slots: int, rng: np.random.Generator,
              window: int = 1000) -> list[dict]:
    rows = []
    s = env.features().copy()
    acc_u = acc_c = 0.0
    for i in range(num_slots):
        c = getattr(env, "aos", 0)
        a = sample_index(np.exp(log_softmax(forward(tr.actor, s)[0])), rng)
        u, _ = env.step(a)
        s2 = env.features().copy()
        _, ag, loss, cg, delta = a2c_grads(tr.actor, tr.critic, (s, a, u, s2), tr.gamma,
                                           tr.entropy_bonus)
        if not np.isfinite(loss):
            raise TrainingError(f"A2C diverged at slot {tr.slot}: delta={delta}")
        adam_update(tr.actor, ag, tr.actor_opt, maximize=True)
        adam_update(tr.critic, cg, tr.critic_opt, maximize=False)
        tr.slot += 1
        acc_u += u
        acc_c += c
        if (i + 1) % window == 0:
            rows.append({"slot": tr.slot, "window_mean_u": acc_u / window,
                         "window_mean_c": acc_c / window})
            acc_u = acc_c = 0.0
        s = s2
    return rows


def a2c_policy(tr: A2CTrainer, greedy: bool = False) -> PolicyHandle:
    return PolicyHandle("actor", tr.actor.shape[2], tr.actor.copy(), greedy=greedy)


# ---------------------------------------------------------------------------
# Conservative Q-learning

@dataclass
class CQLTrainer:
    q: MlpParams
    q_opt: AdamState
    target: MlpParams
    gamma: float = 0.9
    rho_cql: float = 5e-4
    batch_size: int = 1000
    target_reset: int = 10
    it: int = 0


def make_cql_trainer(n_in: int, n_actions: int, cfg: CQLConfig,
                     rng: np.random.Generator) -> CQLTrainer:
    net = cfg.net
    q = init_params(n_in, net.hidden, n_actions, rng)
    return CQLTrainer(q, AdamState.for_params(q, net.lr_critic, net.beta1, net.beta2,
                                              net.eps_hat),
                      q.copy(), cfg.gamma, cfg.rho_cql, cfg.batch_size, cfg.target_reset)


def cql_penalty(q: np.ndarray, a: np.ndarray):
    """Per-row logsumexp(q) - q[a] and its gradient w.r.t. q."""
    q = np.atleast_2d(q)
    a = np.atleast_1d(a)
    rows = np.arange(q.shape[0])
    qmax = q.max(axis=1, keepdims=True)
    e = np.exp(q - qmax)
    lse = qmax[:, 0] + np.log(e.sum(axis=1))
    grad = e / e.sum(axis=1, keepdims=True)
    grad[rows, a] -= 1.0
    return lse - q[rows, a], grad


def cql_loss_grad(q_params: MlpParams, target: MlpParams, batch, gamma: float, rho_cql: float):
    s, a, u, s2 = batch
    y = (1 - gamma) * np.asarray(u) + gamma * forward(target, s2)[0].max(axis=-1)
    q, cache = forward(q_params, s)
    B = q.shape[0]
    rows = np.arange(B)
    err = q[rows, a] - y
    pen, pen_grad = cql_penalty(q, a)
    up = rho_cql * pen_grad / B
    up[rows, a] += err / B
    loss = 0.5 * float(np.mean(err * err)) + rho_cql * float(np.mean(pen))
    return loss, backprop(q_params, cache, up)


def cql_train(dataset: Dataset, tr: CQLTrainer, num_iters: int,
              rng: np.random.Generator) -> list[dict]:
    if len(dataset) < tr.batch_size:
        raise ValueError(f"dataset smaller than batch size {tr.batch_size}")
    rows = []
    for _ in range(num_iters):
        idx = sample_minibatch(dataset, tr.batch_size, rng)
        loss, grads = cql_loss_grad(tr.q, tr.target, dataset.batch(idx), tr.gamma, tr.rho_cql)
        if not np.isfinite(loss):
            raise TrainingError(f"CQL diverged at iteration {tr.it}")
        adam_update(tr.q, grads, tr.q_opt, maximize=False)
        tr.it += 1
        if tr.it % tr.target_reset == 0:
            tr.target = tr.q.copy()
        rows.append({"iter": tr.it, "loss": loss})
    return rows


def cql_policy(tr: CQLTrainer) -> PolicyHandle:
    return PolicyHandle("greedy-q", tr.q.shape[2], tr.q.copy())
