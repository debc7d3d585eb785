"""Status-update MDP: process chain, destination inference, AoS, utility and the slot step.

Actions are indexed 0..K: index 0 is (n, m) = (0, 0) (stay idle) and index k
is (1, k), i.e. sample and relay through RS k.  RS indices are 1-based.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .channel import (ChannelProfile, block_effective, plan_transmission,
                      sample_channel_block)
from .config import EnvConfig, ProcessConfig, Topology, UtilityWeights

AMP_FLOOR = 1e-30


@dataclass(frozen=True)
class Action:
    n: int
    m: int

    def __post_init__(self):
        if (self.n, self.m) != (0, 0) and not (self.n == 1 and self.m >= 1):
            raise ValueError(f"invalid action (n={self.n}, m={self.m})")

    def index(self) -> int:
        return self.m

    @classmethod
    def from_index(cls, idx: int, K: int) -> "Action":
        if not 0 <= idx <= K:
            raise ValueError(f"action index {idx} outside 0..{K}")
        return cls(0, 0) if idx == 0 else cls(1, idx)


def all_actions(K: int) -> list[Action]:
    return [Action.from_index(i, K) for i in range(K + 1)]


def step_process(X: int, cfg: ProcessConfig, rng: np.random.Generator) -> int:
    """Symmetric chain: stay with prob chi, else jump uniformly to another state."""
    if rng.random() < cfg.chi:
        return X
    other = int(rng.integers(cfg.num_states - 1))
    return other if other < X else other + 1


def infer(X: int, cfg: ProcessConfig, rng: np.random.Generator) -> int:
    """Destination inference: X itself with prob varphi, else a uniform wrong state."""
    if rng.random() < cfg.varphi:
        return X
    other = int(rng.integers(cfg.num_states - 1))
    return other if other < X else other + 1


def evolve_aos(c: int, X_next: int, X_hat_next: int, C: int) -> int:
    return 0 if X_hat_next == X_next else min(c + 1, C)


def utility(c: int, n: int, energy_tx: float, wts: UtilityWeights) -> float:
    cost = wts.kappa * c
    if n == 1:
        cost += wts.vartheta * (wts.varrho + energy_tx)
    return math.exp(-cost)


@dataclass
class SystemState:
    c: int
    y: int
    X: int
    X_hat: int
    amp_sr: np.ndarray          # effective SN->RS_k amplitudes, (K,)
    amp_rd: np.ndarray          # effective RS_k->dest amplitudes, (K,)
    channels: ChannelProfile | None = None


class StepInfo(NamedTuple):
    n: int
    m: int
    p: float          # power radiated by the SN, W
    tau1: float
    tau2: float
    energy: float     # total energy charged in the slot, J
    feasible: bool
    handover: bool


# ---------------------------------------------------------------------------
# Features

@dataclass(frozen=True)
class FeatureScaler:
    """Frozen standardisation of log10 effective amplitudes, columns [sr_1..sr_K, rd_1..rd_K]."""
    mean: tuple[float, ...]
    scale: tuple[float, ...]

    def arrays(self):
        return np.asarray(self.mean), np.asarray(self.scale)


def _log_amps(sr: np.ndarray, rd: np.ndarray) -> np.ndarray:
    return np.log10(np.maximum(np.concatenate([sr, rd], axis=-1), AMP_FLOOR))


@functools.lru_cache(maxsize=32)
def _fit_scaler(topology: Topology, I: int, zeta: float, draws: int, seed: int) -> FeatureScaler:
    rng = np.random.default_rng(seed)
    chunks = []
    done = 0
    while done < draws:
        n = min(1000, draws - done)
        sr, rd = block_effective(sample_channel_block(rng, topology, I, n), zeta)
        chunks.append(_log_amps(sr, rd))
        done += n
    logs = np.concatenate(chunks)
    scale = logs.std(axis=0)
    scale[scale <= 0] = 1.0
    return FeatureScaler(tuple(map(float, logs.mean(axis=0))), tuple(map(float, scale)))


def fit_scaler(cfg: EnvConfig) -> FeatureScaler:
    return _fit_scaler(cfg.topology, cfg.radio.I, cfg.radio.zeta, cfg.warmup_draws,
                       cfg.warmup_seed)


def encode_features(state: SystemState, cfg: EnvConfig, scaler: FeatureScaler) -> np.ndarray:
    """[c/C] ++ one-hot(y) ++ standardised log10 SN->RS amps ++ same for RS->dest."""
    K = cfg.K
    x = np.zeros(1 + 3 * K)
    x[0] = state.c / cfg.process.C
    x[state.y] = 1.0
    mean, scale = scaler.arrays()
    x[1 + K:] = (_log_amps(state.amp_sr, state.amp_rd) - mean) / scale
    return x


# ---------------------------------------------------------------------------
# Transition

class ChannelStream:
    """Per-slot i.i.d. channel draws from a dedicated RNG, generated in blocks."""

    def __init__(self, cfg: EnvConfig, rng: np.random.Generator, block: int = 256,
                 keep_profiles: bool = False):
        self.cfg = cfg
        self.rng = rng
        self.block = block
        self.keep_profiles = keep_profiles
        self._pos = block
        self._sr = self._rd = None
        self._profiles = None

    def __call__(self):
        if self._pos >= self.block:
            blk = sample_channel_block(self.rng, self.cfg.topology, self.cfg.radio.I, self.block)
            self._sr, self._rd = block_effective(blk, self.cfg.radio.zeta)
            self._profiles = blk if self.keep_profiles else None
            self._pos = 0
        i = self._pos
        self._pos += 1
        profile = None
        if self._profiles is not None:
            b = self._profiles
            profile = ChannelProfile(b.sn_rs[i], b.sn_irs[i], b.irs_rs[i], b.rs_irs[i],
                                     b.irs_dest[i], b.rs_dest[i])
        return self._sr[i], self._rd[i], profile


def env_step(state: SystemState, action: Action, cfg: EnvConfig, rng: np.random.Generator,
             draw_channels: Callable[[], tuple]) -> tuple[SystemState, float, StepInfo]:
    """Advance one slot.  ``rng`` drives the process and inference; channels come
    from ``draw_channels`` so that they never depend on the action taken."""
    if not isinstance(action, Action):
        raise TypeError("action must be an Action")
    K = cfg.K
    if action.m > K:
        raise ValueError(f"relay index {action.m} outside 1..{K}")
    pc, radio, wts = cfg.process, cfg.radio, cfg.weights
    X_hat = state.X_hat
    if action.n == 1:
        k = action.m - 1
        handover = action.m != state.y
        plan = plan_transmission(float(state.amp_sr[k]), float(state.amp_rd[k]), handover, radio)
        y_next = action.m
        energy_tx = plan.tx_energy
        energy = wts.varrho + energy_tx
        if plan.feasible:
            X_hat = infer(state.X, pc, rng)
        info = StepInfo(1, action.m, plan.p_used, plan.tau1, plan.tau2, energy,
                        plan.feasible, handover)
    else:
        y_next = state.y
        energy_tx = 0.0
        info = StepInfo(0, 0, 0.0, 0.0, 0.0, 0.0, True, False)
    u = utility(state.c, action.n, energy_tx, wts)
    X_next = step_process(state.X, pc, rng)
    c_next = evolve_aos(state.c, X_next, X_hat, pc.C)
    sr, rd, profile = draw_channels()
    nxt = SystemState(c_next, y_next, X_next, X_hat, sr, rd, profile)
    return nxt, u, info


class AosEnv:
    """Stateful wrapper owning its RNG streams; the interface the learners use."""

    def __init__(self, cfg: EnvConfig, seed: int = 0, scaler: FeatureScaler | None = None,
                 keep_profiles: bool = False):
        self.cfg = cfg
        self.scaler = scaler if scaler is not None else fit_scaler(cfg)
        self.num_actions = cfg.num_actions
        self.feature_dim = cfg.feature_dim
        self.keep_profiles = keep_profiles
        self.reset(seed)

    def reset(self, seed: int):
        proc_ss, chan_ss = np.random.SeedSequence(seed).spawn(2)
        self.rng = np.random.default_rng(proc_ss)
        self.channels = ChannelStream(self.cfg, np.random.default_rng(chan_ss),
                                      keep_profiles=self.keep_profiles)
        X = int(self.rng.integers(self.cfg.process.num_states))
        sr, rd, profile = self.channels()
        self.state = SystemState(0, 1, X, X, sr, rd, profile)
        self._feat = None
        return self.features()

    @property
    def aos(self) -> int:
        return self.state.c

    def features(self) -> np.ndarray:
        if self._feat is None:
            self._feat = encode_features(self.state, self.cfg, self.scaler)
        return self._feat

    def step(self, action_index: int) -> tuple[float, StepInfo]:
        action = Action.from_index(int(action_index), self.cfg.K)
        self.state, u, info = env_step(self.state, action, self.cfg, self.rng, self.channels)
        self._feat = None
        return u, info


def with_process(cfg: EnvConfig, **kwargs) -> EnvConfig:
    return replace(cfg, process=replace(cfg.process, **kwargs))


def with_radio(cfg: EnvConfig, **kwargs) -> EnvConfig:
    return replace(cfg, radio=replace(cfg.radio, **kwargs))
