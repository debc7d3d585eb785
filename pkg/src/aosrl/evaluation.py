"""Single long-rollout evaluation of a frozen policy."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .config import EnvConfig
from .env import AosEnv


class EvalResult(NamedTuple):
    mean_u: float
    mean_c: float
    mean_energy: float
    std_u: float


def rollout(env, policy, horizon: int, rng: np.random.Generator) -> EvalResult:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    us = np.empty(horizon)
    cs = np.empty(horizon)
    es = np.empty(horizon)
    x = env.features()
    for j in range(horizon):
        cs[j] = env.aos
        a = policy.act(x, rng)
        us[j], info = env.step(a)
        es[j] = info.energy
        x = env.features()
    return EvalResult(float(us.mean()), float(cs.mean()), float(es.mean()), float(us.std()))


def evaluate_policy(env_config: EnvConfig, policy, horizon: int, rng: np.random.Generator,
                    env_seed: int | None = None) -> EvalResult:
    """Means of utility, AoS and per-slot energy over one continuing rollout.

    The environment seed is drawn from ``rng`` unless given, so that paired
    comparisons can share the same channel and process realisations.
    """
    if env_seed is None:
        env_seed = int(rng.integers(2**31))
    env = AosEnv(env_config, seed=env_seed)
    return rollout(env, policy, horizon, rng)
