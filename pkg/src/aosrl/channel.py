"""IRS-aided relay link model: effective gains, rates, sub-slot timing and SN power."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import RadioConfig, Topology


@dataclass(frozen=True)
class LinkAmplitudes:
    """Direct path plus I cascaded (to-IRS, from-IRS) complex coefficients."""
    direct: complex
    to_irs: np.ndarray
    from_irs: np.ndarray

    def __post_init__(self):
        to_irs = np.asarray(self.to_irs, dtype=complex).ravel()
        from_irs = np.asarray(self.from_irs, dtype=complex).ravel()
        if to_irs.shape != from_irs.shape:
            raise ValueError(
                f"cascaded arrays differ in length: {to_irs.size} vs {from_irs.size}")
        object.__setattr__(self, "to_irs", to_irs)
        object.__setattr__(self, "from_irs", from_irs)

    @property
    def I(self) -> int:
        return self.to_irs.size


def effective_amplitude(link: LinkAmplitudes, zeta: float) -> float:
    """|g| + zeta * sum_i |a_i * b_i| for one IRS-aided hop."""
    return float(abs(link.direct) + zeta * np.sum(np.abs(link.to_irs * link.from_irs)))


def uplink_rate(p_tx: float, amp: float, cfg: RadioConfig) -> float:
    """Achievable rate in bits/s at transmit power ``p_tx`` over effective amplitude ``amp``."""
    snr = p_tx * amp * amp / (cfg.w * cfg.sigma2)
    return cfg.w * math.log2(1.0 + snr)


def subslot_durations(rate_rs_to_dest: float, handover: bool, cfg: RadioConfig):
    """Return (tau1, tau2).  tau1 <= 0 flags a slot in which the SN cannot transmit."""
    if rate_rs_to_dest <= 0:
        return -math.inf, math.inf
    tau2 = cfg.upsilon / rate_rs_to_dest
    tau1 = cfg.tau - tau2 - (cfg.delta if handover else 0.0)
    return tau1, tau2


def required_power(tau1: float, amp_sn_to_rs: float, cfg: RadioConfig) -> float:
    """SN power needed to push upsilon bits to the relay within tau1; inf if impossible."""
    if tau1 <= 0 or amp_sn_to_rs <= 0:
        return math.inf
    expo = cfg.upsilon / (tau1 * cfg.w)
    if expo > 1000:
        return math.inf
    return cfg.w * cfg.sigma2 / (amp_sn_to_rs * amp_sn_to_rs) * (2.0 ** expo - 1.0)


@dataclass(frozen=True)
class SlotPlan:
    """Timing and power of one sampling slot.

    ``feasible`` is False when the relay hop leaves no time for the SN
    (``reason='no_time'``) or the SN would need more than P
    (``reason='power_cap'``).  ``p_used`` is the power actually radiated.
    """
    tau1: float
    tau2: float
    p_required: float
    p_used: float
    feasible: bool
    reason: str

    @property
    def tx_energy(self) -> float:
        return self.p_used * self.tau1 if self.tau1 > 0 else 0.0


def plan_transmission(amp_sn_to_rs: float, amp_rs_to_dest: float, handover: bool,
                      cfg: RadioConfig) -> SlotPlan:
    rate = uplink_rate(cfg.P_k, amp_rs_to_dest, cfg)
    tau1, tau2 = subslot_durations(rate, handover, cfg)
    if tau1 <= 0:
        return SlotPlan(tau1, tau2, math.inf, 0.0, False, "no_time")
    p = required_power(tau1, amp_sn_to_rs, cfg)
    if p > cfg.P:
        return SlotPlan(tau1, tau2, p, cfg.P, False, "power_cap")
    return SlotPlan(tau1, tau2, p, p, True, "ok")


# ---------------------------------------------------------------------------
# Channel draws

@dataclass(frozen=True)
class ChannelProfile:
    """CSI of one slot for all K relays.

    Shapes: ``sn_rs`` (K,), ``sn_irs`` (I,), ``irs_rs`` (K, I),
    ``rs_irs`` (K, I), ``irs_dest`` (I,), ``rs_dest`` (K,).
    """
    sn_rs: np.ndarray
    sn_irs: np.ndarray
    irs_rs: np.ndarray
    rs_irs: np.ndarray
    irs_dest: np.ndarray
    rs_dest: np.ndarray

    @property
    def K(self) -> int:
        return self.sn_rs.size

    def sn_to_rs(self, k: int) -> LinkAmplitudes:
        return LinkAmplitudes(self.sn_rs[k], self.sn_irs, self.irs_rs[k])

    def rs_to_dest(self, k: int) -> LinkAmplitudes:
        return LinkAmplitudes(self.rs_dest[k], self.rs_irs[k], self.irs_dest)

    def effective(self, zeta: float) -> tuple[np.ndarray, np.ndarray]:
        """Effective amplitudes (SN->RS_k, RS_k->dest) for every relay."""
        sr = np.abs(self.sn_rs) + zeta * np.abs(self.irs_rs * self.sn_irs).sum(axis=-1)
        rd = np.abs(self.rs_dest) + zeta * np.abs(self.rs_irs * self.irs_dest).sum(axis=-1)
        return sr, rd


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def rician(rng: np.random.Generator, shape, k_factor: float) -> np.ndarray:
    """Unit-mean-power Rician coefficients; k_factor=inf gives the pure LoS term."""
    if math.isinf(k_factor):
        return np.ones(shape, dtype=complex)
    los = math.sqrt(k_factor / (k_factor + 1.0))
    nlos = math.sqrt(1.0 / (k_factor + 1.0))
    return los + nlos * _cn(rng, shape)


def rayleigh(rng: np.random.Generator, shape) -> np.ndarray:
    return _cn(rng, shape)


def sample_channel_block(rng: np.random.Generator, topology: Topology, I: int,
                         n: int) -> ChannelProfile:
    """Draw ``n`` i.i.d. slots at once; every array gains a leading slot axis."""
    g = topology.mean_gains()
    K, kf = topology.K, topology.rician_k
    amp = {key: np.sqrt(np.asarray(v, dtype=float)) for key, v in g.items()}
    return ChannelProfile(
        sn_rs=amp["sn_rs"] * rayleigh(rng, (n, K)),
        sn_irs=amp["sn_irs"] * rician(rng, (n, I), kf),
        irs_rs=amp["irs_rs"][:, None] * rician(rng, (n, K, I), kf),
        rs_irs=amp["irs_rs"][:, None] * rician(rng, (n, K, I), kf),
        irs_dest=amp["irs_dest"] * rician(rng, (n, I), kf),
        rs_dest=amp["rs_dest"] * rayleigh(rng, (n, K)),
    )


def sample_channel_profile(rng: np.random.Generator, topology: Topology,
                           I: int) -> ChannelProfile:
    block = sample_channel_block(rng, topology, I, 1)
    return ChannelProfile(*(a[0] for a in (block.sn_rs, block.sn_irs, block.irs_rs,
                                           block.rs_irs, block.irs_dest, block.rs_dest)))


def block_effective(block: ChannelProfile, zeta: float) -> tuple[np.ndarray, np.ndarray]:
    """Effective amplitudes for a block: two (n, K) arrays."""
    sr = np.abs(block.sn_rs) + zeta * np.abs(block.irs_rs * block.sn_irs[:, None, :]).sum(-1)
    rd = np.abs(block.rs_dest) + zeta * np.abs(block.rs_irs * block.irs_dest[:, None, :]).sum(-1)
    return sr, rd
