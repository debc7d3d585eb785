"""Configuration dataclasses for the relay system, the status process and the learners.

Defaults follow the experimental parameter table; every field can be
overridden from a JSON config (see ``load_config``).  Powers are held in
Watts; fields named ``*_dbm`` in JSON are converted on parse.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt * 1000.0)


@dataclass(frozen=True)
class RadioConfig:
    w: float = 10e6                      # bandwidth, Hz
    sigma2: float = dbm_to_watt(-174.0)  # noise PSD, W/Hz
    zeta: float = 1.0                    # IRS amplitude reflection coefficient
    I: int = 75                          # IRS element count
    P: float = dbm_to_watt(30.0)         # SN max transmit power, W
    P_k: float = dbm_to_watt(30.0)       # RS transmit power, W
    upsilon: float = 6.2e6               # semantic sample size, bits
    tau: float = 0.1                     # handover + two transmission sub-slots, s
    delta: float = 1e-3                  # handover delay, s

    def __post_init__(self):
        for name in ("w", "sigma2", "zeta", "P", "P_k", "upsilon", "tau", "delta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"RadioConfig.{name} must be positive")
        if self.zeta > 1:
            raise ConfigError("zeta must lie in (0, 1]")
        if self.I < 0:
            raise ConfigError("I must be >= 0")
        if self.delta >= self.tau:
            raise ConfigError("handover delay must be shorter than tau")


@dataclass(frozen=True)
class Topology:
    """Node placement (metres) and propagation parameters.

    Links touching the IRS are line-of-sight (Rician); the direct SN-RS and
    RS-destination links are blocked and carry an extra ``nlos_loss_db``.
    """
    sn: tuple[float, float] = (0.0, 0.0)
    irs: tuple[float, float] = (140.0, 30.0)
    dest: tuple[float, float] = (200.0, 0.0)
    rs: tuple[tuple[float, float], ...] = (
        (120.0, -40.0), (120.0, -20.0), (120.0, 0.0), (120.0, 20.0), (120.0, 40.0))
    ref_gain_db: float = -30.0      # path gain at the reference distance
    ref_dist: float = 1.0
    pathloss_exp: float = 2.5
    nlos_loss_db: float = 15.0
    rician_k: float = 10.0

    @property
    def K(self) -> int:
        return len(self.rs)

    def path_gain(self, a, b, nlos: bool = False) -> float:
        d = max(math.dist(a, b), self.ref_dist)
        g = 10.0 ** (self.ref_gain_db / 10.0) * (d / self.ref_dist) ** (-self.pathloss_exp)
        if nlos:
            g *= 10.0 ** (-self.nlos_loss_db / 10.0)
        return g

    def mean_gains(self) -> dict[str, Any]:
        """Mean power gain of every link class; per-RS entries are lists of length K."""
        return {
            "sn_rs": [self.path_gain(self.sn, r, nlos=True) for r in self.rs],
            "sn_irs": self.path_gain(self.sn, self.irs),
            "irs_rs": [self.path_gain(self.irs, r) for r in self.rs],
            "rs_dest": [self.path_gain(r, self.dest, nlos=True) for r in self.rs],
            "irs_dest": self.path_gain(self.irs, self.dest),
        }


@dataclass(frozen=True)
class ProcessConfig:
    num_states: int = 9
    chi: float = 0.5       # probability the process keeps its state
    varphi: float = 0.5    # probability of a perfect inference at the destination
    C: int = 30            # AoS cap

    def __post_init__(self):
        if self.num_states < 2:
            raise ConfigError("num_states must be >= 2")
        if self.C < 1:
            raise ConfigError("C must be >= 1")
        if not (0 <= self.chi <= 1 and 0 <= self.varphi <= 1):
            raise ConfigError("chi and varphi must lie in [0, 1]")


@dataclass(frozen=True)
class UtilityWeights:
    kappa: float = 5e-2
    vartheta: float = 1.0
    varrho: float = 0.01   # sampling + semantic extraction energy, J

    def __post_init__(self):
        if min(self.kappa, self.vartheta, self.varrho) <= 0:
            raise ConfigError("utility weights must be positive")


@dataclass(frozen=True)
class EnvConfig:
    radio: RadioConfig = field(default_factory=RadioConfig)
    topology: Topology = field(default_factory=Topology)
    process: ProcessConfig = field(default_factory=ProcessConfig)
    weights: UtilityWeights = field(default_factory=UtilityWeights)
    warmup_draws: int = 10_000
    warmup_seed: int = 20240601

    @property
    def K(self) -> int:
        return self.topology.K

    @property
    def num_actions(self) -> int:
        return self.K + 1

    @property
    def feature_dim(self) -> int:
        return 1 + 3 * self.K


@dataclass(frozen=True)
class NetConfig:
    hidden: int = 64
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8


@dataclass(frozen=True)
class OnlineConfig:
    gamma: float = 0.9
    alpha: float = 1e-4
    target_reset: int = 100
    window: int = 1000
    net: NetConfig = field(default_factory=NetConfig)

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must lie in [0, 1)")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")


@dataclass(frozen=True)
class OfflineConfig:
    gamma: float = 0.9
    alpha: float = 1e-4
    rho: float = 5e-4
    nu: float = 1.0
    batch_size: int = 1000
    target_reset: int = 10
    num_iters: int = 1000
    net: NetConfig = field(default_factory=NetConfig)

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must lie in [0, 1)")
        if self.rho < 0 or self.nu < 0 or self.alpha < 0:
            raise ConfigError("rho, nu and alpha must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


@dataclass(frozen=True)
class A2CConfig:
    gamma: float = 0.9
    entropy_bonus: float = 0.01
    window: int = 1000
    net: NetConfig = field(default_factory=NetConfig)


@dataclass(frozen=True)
class CQLConfig:
    gamma: float = 0.9
    rho_cql: float = 5e-4
    batch_size: int = 1000
    target_reset: int = 10
    num_iters: int = 1000
    net: NetConfig = field(default_factory=NetConfig)


# Learning rates used by the desk-scale experiments: interactive learners see
# 5e4 slots, dataset learners 1e3 minibatches, so the latter step harder.
DESK_ONLINE_NET = NetConfig(lr_actor=1e-3, lr_critic=1e-3)
DESK_OFFLINE_NET = NetConfig(lr_actor=3e-3, lr_critic=3e-3)


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    online: OnlineConfig = field(default_factory=lambda: OnlineConfig(net=DESK_ONLINE_NET))
    offline: OfflineConfig = field(default_factory=lambda: OfflineConfig(net=DESK_OFFLINE_NET))
    a2c: A2CConfig = field(default_factory=lambda: A2CConfig(net=DESK_ONLINE_NET))
    cql: CQLConfig = field(default_factory=lambda: CQLConfig(net=DESK_OFFLINE_NET))
    chi_list: tuple[float, ...] = (0.5,)
    varphi_list: tuple[float, ...] = (0.5,)
    xi_list: tuple[float, ...] = (1.0,)
    I_list: tuple[int, ...] = (75,)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    dataset_size: int = 20_000
    online_slots: int = 50_000
    a2c_slots: int = 50_000
    eval_horizon: int = 10_000
    eval_every: int = 50
    curve_horizon: int = 2_000
    schemes: tuple[str, ...] = (
        "random", "a2c", "online_dac", "offline_dac_expert", "offline_dac_random",
        "cql_expert", "cql_random")

    def __post_init__(self):
        for v in (*self.chi_list, *self.varphi_list, *self.xi_list):
            if not 0 <= v <= 1:
                raise ConfigError("sweep probabilities must lie in [0, 1]")
        for name in ("dataset_size", "online_slots", "a2c_slots", "eval_horizon"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    def digest(self) -> str:
        blob = json.dumps(to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def full_scale(cfg: RunConfig) -> RunConfig:
    """Ten-fold dataset and evaluation budgets with 5000-tuple minibatches."""
    return dataclasses.replace(
        cfg, dataset_size=200_000, eval_horizon=100_000,
        offline=dataclasses.replace(cfg.offline, batch_size=5_000),
        cql=dataclasses.replace(cfg.cql, batch_size=5_000))


def to_dict(obj) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    return obj


def _merge(base, data: dict[str, Any]):
    """Copy of dataclass instance ``base`` with the keys of ``data`` overridden."""
    cls = type(base)
    if not isinstance(data, dict):
        raise ConfigError(f"expected an object for {cls.__name__}")
    data = dict(data)
    kwargs: dict[str, Any] = {}
    for key in list(data):
        if key.endswith("_dbm_hz") or key.endswith("_dbm"):
            base_key = key.rsplit("_dbm", 1)[0]
            kwargs[base_key] = dbm_to_watt(float(data.pop(key)))
    names = {f.name for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown key {key!r} for {cls.__name__}")
        current = getattr(base, key)
        if dataclasses.is_dataclass(current):
            kwargs[key] = _merge(current, value)
        elif isinstance(current, tuple):
            kwargs[key] = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        else:
            kwargs[key] = value
    try:
        return dataclasses.replace(base, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def run_config_from_dict(data: dict[str, Any]) -> RunConfig:
    return _merge(RunConfig(), data)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return run_config_from_dict(data)
