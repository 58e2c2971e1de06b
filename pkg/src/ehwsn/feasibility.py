"""Rate and budget feasibility for a slot problem.

The rate constraint SINR_l >= threshold_l is linear in raw powers:

    p_l >= sum_{k != l} (threshold_l G[k, l] / G[l, l]) p_k
           + threshold_l noise_l / G[l, l]

i.e. p >= M p + b with M nonnegative. A finite componentwise-minimal solution
exists iff the spectral radius of M is below one, in which case it solves
(I - M) p = b; every feasible power profile dominates it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelState
from .problem import SlotProblem, validate_slot_problem

__all__ = [
    "RateInfeasibleError",
    "FeasibilityReport",
    "spectral_radius",
    "min_power_vector",
    "check_problem_feasible",
]

SPECTRAL_TOL = 1e-10
SPECTRAL_MAX_ITER = 10_000


class RateInfeasibleError(ValueError):
    """No finite power profile satisfies every link's rate constraint."""

    def __init__(self, radius: float):
        super().__init__(
            f"rate constraints infeasible: interference fixed point diverges "
            f"(spectral radius {radius:.6g} >= 1)"
        )
        self.spectral_radius = radius


def spectral_radius(m: np.ndarray) -> float:
    """Perron root of a nonnegative matrix by power iteration.

    Iterates on M + I (same eigenvectors, radius shifted by exactly one) so
    bipartite-like interference patterns cannot make the iteration oscillate.
    """
    m = np.asarray(m, dtype=float)
    if m.size == 0 or not m.any():
        return 0.0
    v = np.ones(m.shape[0])
    estimate = np.inf
    for _ in range(SPECTRAL_MAX_ITER):
        w = v + m @ v
        top = float(np.max(w))
        if top <= 0 or not np.isfinite(top):
            return 0.0
        new_estimate = top / float(np.max(v))
        v = w / top
        if abs(new_estimate - estimate) <= SPECTRAL_TOL * (1.0 + abs(new_estimate)):
            return new_estimate - 1.0
        estimate = new_estimate
    return estimate - 1.0


def _rate_system(channel: ChannelState, thresholds: np.ndarray):
    g = channel.gains
    diag = np.diag(g)
    m = thresholds[:, None] * g.T / diag[:, None]
    np.fill_diagonal(m, 0.0)
    b = thresholds * channel.noise / diag
    return m, b


def _threshold_min_powers(channel: ChannelState, thresholds: np.ndarray):
    m, b = _rate_system(channel, thresholds)
    radius = spectral_radius(m)
    if radius >= 1.0:
        raise RateInfeasibleError(radius)
    powers = np.linalg.solve(np.eye(len(b)) - m, b)
    return powers, radius


def min_power_vector(channel: ChannelState, flows: np.ndarray) -> np.ndarray:
    """Componentwise-minimal powers meeting every exact-capacity rate
    constraint (1/2) ln(1 + SINR_l) >= flow_l with equality.

    Raises RateInfeasibleError when the interference fixed point diverges.
    """
    flows = np.asarray(flows, dtype=float)
    thresholds = np.expm1(2.0 * flows)
    powers, _ = _threshold_min_powers(channel, thresholds)
    return powers


@dataclass(frozen=True, eq=False)
class FeasibilityReport:
    """Outcome of the slot feasibility probe.

    witness, when present, is a strictly interior starting point
    (log powers, transfers) for the surrogate problem.
    """

    feasible: bool
    rate_feasible: bool
    spectral_radius: float
    spectral_radius_surrogate: float
    min_powers: np.ndarray | None
    node_slack: dict[int, float]
    witness: tuple[np.ndarray, np.ndarray] | None
    reasons: tuple[str, ...]


def _witness_transfers(problem: SlotProblem) -> np.ndarray:
    """Half of each donor's budget, split evenly over its outgoing links."""
    x = np.zeros(problem.n_transfers)
    counts: dict[int, int] = {}
    for el in problem.energy_links:
        counts[el.donor] = counts.get(el.donor, 0) + 1
    for q, el in enumerate(problem.energy_links):
        x[q] = 0.5 * problem.node_energy[el.donor] / counts[el.donor]
    return x


def _budget_slack(problem: SlotProblem, p: np.ndarray, x: np.ndarray) -> dict[int, float]:
    slack = {n: problem.node_energy[n] for n in problem.budget_nodes()}
    for l, node in enumerate(problem.link_sources):
        slack[node] -= p[l]
    for q, el in enumerate(problem.energy_links):
        slack[el.donor] -= x[q]
        if el.recipient in slack:
            slack[el.recipient] += el.efficiency * x[q]
    return slack


def check_problem_feasible(
    problem: SlotProblem, *, transfer: bool = True, half_duplex: bool = True
) -> FeasibilityReport:
    """Probe rate feasibility and hunt for a strictly interior witness.

    The witness solves the surrogate rate system (thresholds e^{2 d_l}) at a
    joint capacity margin delta bounded by the spectral radius, scales the
    result by 1.05, and seeds transfers at half the donor budgets; delta
    shrinks geometrically until the budgets hold strictly. Uniform up-scaling
    can only raise SINR, so the rate margins survive the scaling.
    """
    validate_slot_problem(problem, half_duplex=half_duplex)
    if not transfer:
        problem = problem.without_transfer()
    reasons: list[str] = []

    exact_thresholds = np.expm1(2.0 * problem.flows)
    m_exact, _ = _rate_system(problem.channel, exact_thresholds)
    radius_exact = spectral_radius(m_exact)
    min_powers = None
    if radius_exact < 1.0:
        min_powers = min_power_vector(problem.channel, problem.flows)
    else:
        reasons.append(
            f"exact rate constraints infeasible (spectral radius {radius_exact:.6g})"
        )

    surrogate_thresholds = np.exp(2.0 * problem.flows)
    m_sur, _ = _rate_system(problem.channel, surrogate_thresholds)
    radius_sur = spectral_radius(m_sur)
    rate_feasible = radius_sur < 1.0
    if not rate_feasible:
        reasons.append(
            f"surrogate rate constraints infeasible (spectral radius {radius_sur:.6g})"
        )

    node_slack: dict[int, float] = {}
    if min_powers is not None:
        x0 = np.zeros(problem.n_transfers)
        node_slack = _budget_slack(problem, min_powers, x0)

    witness = None
    if rate_feasible:
        x_w = _witness_transfers(problem)
        # Largest joint margin still inside the rate region, then back off.
        if radius_sur > 0.0:
            delta = min(0.5, -0.25 * np.log(radius_sur))
        else:
            delta = 0.5
        for _ in range(60):
            try:
                base, _ = _threshold_min_powers(
                    problem.channel, np.exp(2.0 * (problem.flows + delta))
                )
            except RateInfeasibleError:
                delta *= 0.25
                continue
            candidate = 1.05 * base
            slack = _budget_slack(problem, candidate, x_w)
            if all(
                s > 1e-9 * (1.0 + problem.node_energy[n]) for n, s in slack.items()
            ):
                witness = (np.log(candidate), x_w)
                break
            delta *= 0.25
            if delta < 1e-14:
                break
        if witness is None:
            reasons.append("no strictly interior witness under the energy budgets")
    return FeasibilityReport(
        feasible=rate_feasible and witness is not None,
        rate_feasible=rate_feasible,
        spectral_radius=radius_exact,
        spectral_radius_surrogate=radius_sur,
        min_powers=min_powers,
        node_slack=node_slack,
        witness=witness,
        reasons=tuple(reasons),
    )
