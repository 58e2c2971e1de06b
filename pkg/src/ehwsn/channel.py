"""Interference channel: SINR, Shannon capacities, M/M/1 link delays.

Rates are in nats throughout. An active link decodes against the summed
interference of every other simultaneous transmission plus receiver noise:

    SINR_l = G[l, l] p_l / (sum_{k != l} G[k, l] p_k + noise_l)

Capacity is c_l = (1/2) ln(1 + SINR_l); the high-SINR surrogate drops the 1
and becomes concave in log powers. A link carrying flow d_l behaves like an
M/M/1 queue with mean delay d_l / (c_l - d_l).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CapacityViolation",
    "ChannelState",
    "PowerVector",
    "sample_gains",
    "sinr",
    "sinr_vector",
    "capacity_exact",
    "capacity_exact_vector",
    "capacity_approx",
    "capacity_approx_vector",
    "link_delay",
    "delay_vector",
    "total_delay",
]

DEFAULT_NOISE = 1e-5
DEFAULT_GAIN_HIGH = 0.01

# Power/log-power pairs must agree to this tolerance.
_CONSISTENCY_TOL = 1e-14


class CapacityViolation(ValueError):
    """A link's capacity does not exceed its assigned flow."""


@dataclass(frozen=True, eq=False)
class ChannelState:
    """Gain matrix and per-link receiver noise for one slot's active links.

    gains[k, l] is the gain from the transmitter of link k into the receiver
    of link l; the diagonal holds the primary-link gains.
    """

    gains: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float)
        noise = np.asarray(self.noise, dtype=float)
        if gains.ndim != 2 or gains.shape[0] != gains.shape[1]:
            raise ValueError("gain matrix must be square")
        if noise.shape != (gains.shape[0],):
            raise ValueError("noise vector length must match the gain matrix")
        if np.any(np.diag(gains) <= 0):
            raise ValueError("primary-link gains must be positive")
        if np.any(gains < 0):
            raise ValueError("gains must be nonnegative")
        if np.any(noise <= 0):
            raise ValueError("noise powers must be positive")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "noise", noise)

    @property
    def n_links(self) -> int:
        return self.gains.shape[0]

    def orthogonal(self) -> "ChannelState":
        """Same primary gains and noise with all interference gains zeroed."""
        return ChannelState(np.diag(np.diag(self.gains)), self.noise.copy())


@dataclass(frozen=True, eq=False)
class PowerVector:
    """Transmit powers kept jointly in linear and log form."""

    p: np.ndarray
    ptilde: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        ptilde = np.asarray(self.ptilde, dtype=float)
        if p.shape != ptilde.shape or p.ndim != 1:
            raise ValueError("power and log-power vectors must be matching 1-d arrays")
        if np.any(p <= 0):
            raise ValueError("powers must be positive")
        if np.max(np.abs(np.log(p) - ptilde), initial=0.0) > _CONSISTENCY_TOL * (
            1.0 + np.max(np.abs(ptilde), initial=0.0)
        ):
            raise ValueError("log powers inconsistent with powers")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "ptilde", ptilde)

    @classmethod
    def from_powers(cls, p) -> "PowerVector":
        p = np.asarray(p, dtype=float)
        return cls(p=p, ptilde=np.log(p))

    @classmethod
    def from_log_powers(cls, ptilde) -> "PowerVector":
        ptilde = np.asarray(ptilde, dtype=float)
        return cls(p=np.exp(ptilde), ptilde=ptilde)


def sample_gains(
    rng: np.random.Generator,
    n_links: int,
    *,
    gain_high: float = DEFAULT_GAIN_HIGH,
    noise: float = DEFAULT_NOISE,
) -> ChannelState:
    """Draw a slot's channel: unit primary gains, interference gains uniform
    on (0, gain_high], constant receiver noise."""
    if n_links <= 0:
        raise ValueError("need at least one link")
    # 1 - U[0, 1) lands in (0, 1], keeping interference gains strictly positive.
    gains = gain_high * (1.0 - rng.random((n_links, n_links)))
    np.fill_diagonal(gains, 1.0)
    return ChannelState(gains=gains, noise=np.full(n_links, float(noise)))


def _interference(channel: ChannelState, p: np.ndarray) -> np.ndarray:
    """Per-link interference-plus-noise power at the receiver.

    Summing only the off-diagonal terms matters: p@G - diag(G)p cancels the
    dominant own-signal term and loses ~SINR ulps of the small remainder."""
    g_off = channel.gains.copy()
    np.fill_diagonal(g_off, 0.0)
    return channel.noise + p @ g_off


def sinr_vector(channel: ChannelState, p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.diag(channel.gains) * p / _interference(channel, p)


def sinr(channel: ChannelState, power: PowerVector, link: int) -> float:
    """Signal-to-interference-plus-noise ratio of one link."""
    return float(sinr_vector(channel, power.p)[link])


def capacity_exact_vector(channel: ChannelState, p: np.ndarray) -> np.ndarray:
    return 0.5 * np.log1p(sinr_vector(channel, p))


def capacity_exact(channel: ChannelState, power: PowerVector, link: int) -> float:
    """Shannon capacity (1/2) ln(1 + SINR) in nats."""
    return float(capacity_exact_vector(channel, power.p)[link])


def _log_interference(channel: ChannelState, ptilde: np.ndarray) -> np.ndarray:
    """ln(noise_l + sum_{k != l} G[k, l] e^{ptilde_k}), evaluated without
    forming e^{ptilde} (shifted log-sum-exp, safe for any log power)."""
    g = channel.gains
    n = channel.n_links
    # Terms per column l: ln(noise_l) and ln(G[k, l]) + ptilde_k for k != l.
    with np.errstate(divide="ignore"):
        log_terms = np.log(g) + ptilde[:, None]
    log_terms[np.arange(n), np.arange(n)] = -np.inf
    stacked = np.vstack([log_terms, np.log(channel.noise)[None, :]])
    shift = stacked.max(axis=0)
    return shift + np.log(np.exp(stacked - shift).sum(axis=0))


def capacity_approx_vector(channel: ChannelState, ptilde: np.ndarray) -> np.ndarray:
    ptilde = np.asarray(ptilde, dtype=float)
    return 0.5 * (
        np.log(np.diag(channel.gains)) + ptilde - _log_interference(channel, ptilde)
    )


def capacity_approx(channel: ChannelState, ptilde: np.ndarray, link: int) -> float:
    """High-SINR capacity surrogate (1/2) ln(SINR), concave in log powers.

    Underestimates the exact capacity by (1/2) ln(1 + 1/SINR).
    """
    return float(capacity_approx_vector(channel, ptilde)[link])


def link_delay(flow: float, capacity: float) -> float:
    """M/M/1 mean delay flow / (capacity - flow); requires capacity > flow."""
    if not capacity > flow:
        raise CapacityViolation(
            f"capacity {capacity} does not exceed flow {flow}"
        )
    return flow / (capacity - flow)


def delay_vector(flows: np.ndarray, capacities: np.ndarray) -> np.ndarray:
    flows = np.asarray(flows, dtype=float)
    capacities = np.asarray(capacities, dtype=float)
    if np.any(capacities <= flows):
        bad = int(np.argmax(capacities <= flows))
        raise CapacityViolation(
            f"capacity {capacities[bad]} does not exceed flow {flows[bad]} (link {bad})"
        )
    return flows / (capacities - flows)


def total_delay(flows: np.ndarray, capacities: np.ndarray) -> float:
    """Network delay: sum of per-link M/M/1 delays."""
    return float(delay_vector(flows, capacities).sum())
