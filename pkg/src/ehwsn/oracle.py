"""Independent low-dimensional ground truth for the solver.

brute_force_solve enumerates a power/transfer grid and polishes the best cell
with coordinate descent; it shares no code with the barrier solver, so
agreement between the two is a meaningful check. convexity_probe samples
midpoints to confirm convexity of the log-domain objective and to exhibit the
non-convexity of the raw-power objective that motivates the change of
variables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .feasibility import min_power_vector
from .problem import SlotProblem, validate_slot_problem

__all__ = [
    "OracleResult",
    "ProbeResult",
    "brute_force_solve",
    "objective_raw_power",
    "convexity_probe",
]

MAX_GRID_LINKS = 3
MAX_GRID_TRANSFERS = 2


@dataclass(frozen=True, eq=False)
class OracleResult:
    powers: np.ndarray
    transfers: np.ndarray
    value: float
    evaluations: int


def _budget_rows(problem: SlotProblem):
    """(nodes, budget, spend, trade) without touching solver internals."""
    nodes = problem.budget_nodes()
    pos = {n: i for i, n in enumerate(nodes)}
    spend = np.zeros((len(nodes), problem.n_links))
    for l, src in enumerate(problem.link_sources):
        spend[pos[src], l] = 1.0
    trade = np.zeros((len(nodes), problem.n_transfers))
    for q, el in enumerate(problem.energy_links):
        trade[pos[el.donor], q] += 1.0
        if el.recipient in pos:
            trade[pos[el.recipient], q] -= el.efficiency
    budget = np.array([problem.node_energy[n] for n in nodes])
    return budget, spend, trade


def _batch_values(problem: SlotProblem, powers: np.ndarray, transfers: np.ndarray):
    """Surrogate-delay objective per row; +inf where rates or budgets fail."""
    g = problem.channel.gains
    diag = np.diag(g).copy()
    g_off = g.copy()
    np.fill_diagonal(g_off, 0.0)
    interference = problem.channel.noise[None, :] + powers @ g_off
    sinr = diag[None, :] * powers / interference
    margin = 0.5 * np.log(sinr) - problem.flows[None, :]
    budget, spend, trade = _budget_rows(problem)
    slack = budget[None, :] - powers @ spend.T
    if transfers.size:
        slack = slack - transfers @ trade.T
    feasible = np.all(margin > 0, axis=1) & np.all(slack >= 0, axis=1)
    values = np.full(powers.shape[0], np.inf)
    rows = np.where(feasible)[0]
    values[rows] = (problem.flows[None, :] / margin[rows]).sum(axis=1)
    return values


def brute_force_solve(
    problem: SlotProblem,
    *,
    transfer: bool = True,
    power_points: int = 15,
    transfer_points: int = 9,
    refine_rounds: int = 20,
) -> OracleResult:
    """Grid search over log-spaced powers (minimum powers up to the budget
    cap) and linearly spaced transfers (zero up to the donor budget), then a
    coordinate-descent polish that halves its step refine_rounds times.

    Deliberately exhaustive and only for instances of at most three links and
    two energy links; the returned value upper-bounds the true optimum.
    """
    validate_slot_problem(problem, half_duplex=False)
    if not transfer:
        problem = problem.without_transfer()
    if problem.n_links > MAX_GRID_LINKS:
        raise ValueError(f"grid oracle handles at most {MAX_GRID_LINKS} links")
    if problem.n_transfers > MAX_GRID_TRANSFERS:
        raise ValueError(
            f"grid oracle handles at most {MAX_GRID_TRANSFERS} energy links"
        )

    p_lo = min_power_vector(problem.channel, problem.flows)
    received_cap = {n: 0.0 for n in problem.node_energy}
    for el in problem.energy_links:
        received_cap[el.recipient] = (
            received_cap.get(el.recipient, 0.0)
            + el.efficiency * problem.node_energy[el.donor]
        )
    p_hi = np.array(
        [
            problem.node_energy[src] + received_cap.get(src, 0.0)
            for src in problem.link_sources
        ]
    )

    log_lo = np.log(p_lo)
    log_hi = np.log(np.maximum(p_hi, p_lo * (1 + 1e-12)))
    power_axes = []
    for l in range(problem.n_links):
        axis = np.exp(np.linspace(log_lo[l], log_hi[l], power_points))
        # exp(log(x)) can land one ulp past the budget cap; pin the endpoints
        axis[0], axis[-1] = p_lo[l], max(p_hi[l], p_lo[l])
        power_axes.append(axis)
    x_hi = np.array([problem.node_energy[el.donor] for el in problem.energy_links])
    transfer_axes = [
        np.linspace(0.0, x_hi[q], transfer_points) for q in range(problem.n_transfers)
    ]

    mesh = np.meshgrid(*(power_axes + transfer_axes), indexing="ij")
    columns = [m.reshape(-1) for m in mesh]
    powers = np.column_stack(columns[: problem.n_links])
    transfers = (
        np.column_stack(columns[problem.n_links :])
        if problem.n_transfers
        else np.zeros((powers.shape[0], 0))
    )
    values = _batch_values(problem, powers, transfers)
    best = int(np.argmin(values))
    best_value = float(values[best])
    evaluations = len(values)
    best_logp = np.log(powers[best])
    best_x = transfers[best].copy()

    def value_at(logp: np.ndarray, x: np.ndarray) -> float:
        return float(
            _batch_values(problem, np.exp(logp)[None, :], x[None, :])[0]
        )

    logp_step = (log_hi - log_lo) / max(power_points - 1, 1)
    x_step = x_hi / max(transfer_points - 1, 1) if problem.n_transfers else np.zeros(0)
    for _ in range(refine_rounds):
        for l in range(problem.n_links):
            for sign in (1.0, -1.0):
                cand = best_logp.copy()
                cand[l] = np.clip(cand[l] + sign * logp_step[l], log_lo[l], log_hi[l])
                val = value_at(cand, best_x)
                evaluations += 1
                if val < best_value:
                    best_value, best_logp = val, cand
        for q in range(problem.n_transfers):
            for sign in (1.0, -1.0):
                cand = best_x.copy()
                cand[q] = np.clip(cand[q] + sign * x_step[q], 0.0, x_hi[q])
                val = value_at(best_logp, cand)
                evaluations += 1
                if val < best_value:
                    best_value, best_x = val, cand
        logp_step = logp_step * 0.5
        x_step = x_step * 0.5
    return OracleResult(
        powers=np.exp(best_logp),
        transfers=best_x,
        value=best_value,
        evaluations=evaluations,
    )


def objective_raw_power(problem: SlotProblem, p: np.ndarray) -> float:
    """Exact-capacity total delay as a function of raw powers; +inf outside
    the rate region. Non-convex under strong interference coupling."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        return np.inf
    g = problem.channel.gains
    diag = np.diag(g).copy()
    g_off = g.copy()
    np.fill_diagonal(g_off, 0.0)
    interference = problem.channel.noise + p @ g_off
    sinr = diag * p / interference
    capacity = 0.5 * np.log1p(sinr)
    margin = capacity - problem.flows
    if np.any(margin <= 0):
        return np.inf
    return float(np.sum(problem.flows / margin))


@dataclass(frozen=True, eq=False)
class ProbeResult:
    max_violation: float
    pairs: int
    witness: tuple[np.ndarray, np.ndarray] | None


def convexity_probe(
    problem: SlotProblem,
    *,
    pairs: int = 1000,
    rng: np.random.Generator,
    raw_power: bool = False,
) -> ProbeResult:
    """Midpoint convexity probe of the delay objective over random feasible
    pairs: returns the largest f(mid) - (f(a) + f(b)) / 2.

    raw_power=False probes the log-domain surrogate (violations should vanish
    to rounding); raw_power=True probes the exact-capacity objective in raw
    powers, where strong coupling produces genuinely positive violations. Both
    domains are convex sets, so midpoints of feasible pairs stay evaluable.
    """
    from .solver import objective_logdomain  # local import avoids a cycle

    p_lo = min_power_vector(problem.channel, problem.flows)
    p_hi = np.array(
        [2.0 * problem.node_energy[src] for src in problem.link_sources]
    )
    log_lo, log_hi = np.log(p_lo), np.log(p_hi)

    def evaluate(point: np.ndarray) -> float:
        if raw_power:
            return objective_raw_power(problem, np.exp(point))
        return objective_logdomain(problem, point)

    samples: list[np.ndarray] = []
    attempts = 0
    while len(samples) < 2 * pairs and attempts < 400 * pairs:
        attempts += 1
        point = log_lo + (log_hi - log_lo) * rng.random(problem.n_links)
        if np.isfinite(evaluate(point)):
            samples.append(point)
    if len(samples) < 2 * pairs:
        raise RuntimeError("could not sample enough feasible points for the probe")

    max_violation = -np.inf
    witness = None
    for k in range(pairs):
        a, b = samples[2 * k], samples[2 * k + 1]
        if raw_power:
            mid = np.log(0.5 * (np.exp(a) + np.exp(b)))
        else:
            mid = 0.5 * (a + b)
        violation = evaluate(mid) - 0.5 * (evaluate(a) + evaluate(b))
        if violation > max_violation:
            max_violation = violation
            witness = (a, b)
    return ProbeResult(max_violation=float(max_violation), pairs=pairs, witness=witness)
