"""Policy handles: uniform random, actor checkpoints and greedy Q checkpoints."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neural import MlpParams, actor_probs, forward


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    cum = np.cumsum(probs)
    idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(idx, probs.size - 1)


@dataclass
class PolicyHandle:
    """``kind`` is one of random, actor, greedy-q, constant."""
    kind: str
    num_actions: int
    params: MlpParams | None = None
    greedy: bool = False
    action: int = 0

    def __post_init__(self):
        if self.kind not in ("random", "actor", "greedy-q", "constant"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind in ("actor", "greedy-q") and self.params is None:
            raise ValueError(f"{self.kind} policy needs network parameters")

    def probs(self, x: np.ndarray) -> np.ndarray:
        n = self.num_actions
        if self.kind == "random":
            return np.full(n, 1.0 / n)
        if self.kind == "constant":
            p = np.zeros(n)
            p[self.action] = 1.0
            return p
        if self.kind == "actor" and not self.greedy:
            return actor_probs(self.params, x)
        out, _ = forward(self.params, x)
        p = np.zeros(n)
        p[int(np.argmax(out))] = 1.0
        return p

    def act(self, x: np.ndarray, rng: np.random.Generator) -> int:
        if self.kind == "random":
            return int(rng.integers(self.num_actions))
        if self.kind == "constant":
            return self.action
        if self.kind == "actor" and not self.greedy:
            return sample_index(actor_probs(self.params, x), rng)
        out, _ = forward(self.params, x)
        return int(np.argmax(out))


def random_policy(num_actions: int) -> PolicyHandle:
    return PolicyHandle("random", num_actions)


def random_policy_probs(state, num_actions: int) -> np.ndarray:
    """Uniform distribution over all actions, whatever the state."""
    return np.full(num_actions, 1.0 / num_actions)
