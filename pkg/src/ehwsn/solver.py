"""Delay-minimizing power and transfer allocation for one slot.

Variables are the active links' log powers (plus transfer amounts when energy
links are present). In log powers the surrogate capacity is concave, so the
total M/M/1 delay

    D = sum_l d_l / (c~_l - d_l),   c~_l = (1/2) ln SINR_l

is convex and the problem is solved to a duality-gap certificate with a primal
log-barrier method: damped Newton with Armijo backtracking on

    D + tie_break * sum(x) - mu * [sum ln(budget slack)
                                   + sum ln(rate margin) + sum ln(x)]

with mu shrunk tenfold per stage until (#constraints) * mu drops below the
requested gap. Multiplier estimates come from the barrier: lambda_n = mu/slack.

Derivatives used everywhere below, with I_l the interference-plus-noise at
link l's receiver, w_kl = G[k,l] e^{pt_k} / I_l (k != l), z_l = c~_l - d_l,
u_l = d_l / z_l^2, v_l = 2 d_l / z_l^3:

    dD/dpt_k      = -u_k / 2 + (1/2) sum_l u_l w_kl
    d2D/dpt_k dpt_m = (1/4) [A diag(v) A^T]_km
                      + (1/2) [diag(W u) - W diag(u) W^T]_km,   A = I - W.

The rate constraint never binds at a finite-delay point (the objective blows
up first), so its multipliers are identically zero and asserted as such.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelState,
    PowerVector,
    capacity_approx_vector,
    capacity_exact_vector,
    sinr_vector,
)
from .feasibility import FeasibilityReport, check_problem_feasible
from .problem import SlotProblem

__all__ = [
    "RATE_MARGIN",
    "TIE_BREAK_WEIGHT",
    "DEFAULT_GAP_TOL",
    "SolverError",
    "InfeasibleProblemError",
    "Solution",
    "KktReport",
    "objective_logdomain",
    "gradient_logdomain",
    "hessian_logdomain",
    "link_lambda_estimates",
    "solve_no_transfer",
    "solve_with_transfer",
    "kkt_report",
]

logger = logging.getLogger(__name__)

# Rate margins are kept at least this far from the blow-up boundary.
RATE_MARGIN = 1e-9
# Linear penalty on total transferred joules; breaks ties among delay-equal x.
TIE_BREAK_WEIGHT = 1e-9
# Terminate once (#constraints) * mu certifies this duality gap.
DEFAULT_GAP_TOL = 1e-10

_MU_START = 1.0
_MU_SHRINK = 10.0
_ARMIJO_SHRINK = 0.5
_ARMIJO_SLOPE = 1e-4
_NEWTON_DECREMENT_TOL = 1e-13
_MAX_NEWTON_PER_STAGE = 400


class SolverError(RuntimeError):
    """The barrier method failed to certify a solution."""


class InfeasibleProblemError(ValueError):
    """No strictly interior point exists; carries the feasibility report."""

    def __init__(self, report: FeasibilityReport):
        super().__init__(
            "slot problem has no strict interior: " + "; ".join(report.reasons)
        )
        self.report = report


def _interference_weights(channel: ChannelState, ptilde: np.ndarray):
    """Log interference and the share matrix w_kl = G[k,l] e^{pt_k} / I_l
    (zero diagonal), computed via shifted exponentials for stability."""
    g = channel.gains
    n = channel.n_links
    with np.errstate(divide="ignore"):
        log_terms = np.log(g) + ptilde[:, None]
    idx = np.arange(n)
    log_terms[idx, idx] = -np.inf
    stacked = np.vstack([log_terms, np.log(channel.noise)[None, :]])
    shift = stacked.max(axis=0)
    log_interference = shift + np.log(np.exp(stacked - shift).sum(axis=0))
    w = np.exp(log_terms - log_interference[None, :])
    return log_interference, w


def _delay_parts(problem: SlotProblem, ptilde: np.ndarray):
    """Margins z, their reciprocal-power weights u, v, and the share matrix."""
    channel = problem.channel
    log_i, w = _interference_weights(channel, ptilde)
    ctilde = 0.5 * (np.log(np.diag(channel.gains)) + ptilde - log_i)
    z = ctilde - problem.flows
    return ctilde, z, w


def objective_logdomain(problem: SlotProblem, ptilde: np.ndarray) -> float:
    """Total delay at log powers ptilde; +inf outside the rate region."""
    ptilde = np.asarray(ptilde, dtype=float)
    _, z, _ = _delay_parts(problem, ptilde)
    if np.any(z <= 0):
        return np.inf
    return float(np.sum(problem.flows / z))


def gradient_logdomain(problem: SlotProblem, ptilde: np.ndarray) -> np.ndarray:
    """Gradient of the total delay in log powers: each component carries the
    link's own-rate term and the interference it inflicts on every other link."""
    ptilde = np.asarray(ptilde, dtype=float)
    _, z, w = _delay_parts(problem, ptilde)
    if np.any(z <= 0):
        raise ValueError("log powers outside the rate region")
    u = problem.flows / z**2
    return -0.5 * u + 0.5 * (w @ u)


def hessian_logdomain(problem: SlotProblem, ptilde: np.ndarray) -> np.ndarray:
    ptilde = np.asarray(ptilde, dtype=float)
    _, z, w = _delay_parts(problem, ptilde)
    if np.any(z <= 0):
        raise ValueError("log powers outside the rate region")
    u = problem.flows / z**2
    v = 2.0 * problem.flows / z**3
    a = np.eye(problem.n_links) - w
    h = 0.25 * (a * v[None, :]) @ a.T
    h += 0.5 * (np.diag(w @ u) - (w * u[None, :]) @ w.T)
    return h


def link_lambda_estimates(problem: SlotProblem, ptilde: np.ndarray) -> np.ndarray:
    """Per-link multiplier estimate: marginal delay reduction per joule of the
    transmitter's power, -e^{-pt_l} dD/dpt_l. At an optimum this is constant
    across a node's outgoing links and equals the node's budget multiplier."""
    ptilde = np.asarray(ptilde, dtype=float)
    return -np.exp(-ptilde) * gradient_logdomain(problem, ptilde)


class _BarrierModel:
    """Constraint bookkeeping for the barrier subproblems of one slot."""

    def __init__(self, problem: SlotProblem):
        self.problem = problem
        self.nodes = problem.budget_nodes()
        pos = {n: i for i, n in enumerate(self.nodes)}
        nl, nq, nb = problem.n_links, problem.n_transfers, len(self.nodes)
        self.budget = np.array([problem.node_energy[n] for n in self.nodes])
        self.spend = np.zeros((nb, nl))
        for l, src in enumerate(problem.link_sources):
            self.spend[pos[src], l] = 1.0
        self.trade = np.zeros((nb, nq))
        for q, el in enumerate(problem.energy_links):
            self.trade[pos[el.donor], q] += 1.0
            if el.recipient in pos:
                self.trade[pos[el.recipient], q] -= el.efficiency
        self.n_constraints = nb + nl + nq
        self.n_vars = nl + nq

    def split(self, y: np.ndarray):
        nl = self.problem.n_links
        return y[:nl], y[nl:]

    def slacks(self, y: np.ndarray):
        ptilde, x = self.split(y)
        _, z, w = _delay_parts(self.problem, ptilde)
        budget_slack = self.budget - self.spend @ np.exp(ptilde)
        if x.size:
            budget_slack = budget_slack - self.trade @ x
        return budget_slack, z - RATE_MARGIN, x, z, w

    def interior(self, y: np.ndarray) -> bool:
        budget_slack, rate_slack, x, _, _ = self.slacks(y)
        return (
            np.all(budget_slack > 0)
            and np.all(rate_slack > 0)
            and (x.size == 0 or np.all(x > 0))
        )

    def value(self, y: np.ndarray, mu: float) -> float:
        ptilde, x = self.split(y)
        budget_slack, rate_slack, x, z, _ = self.slacks(y)
        if (
            np.any(budget_slack <= 0)
            or np.any(rate_slack <= 0)
            or (x.size and np.any(x <= 0))
        ):
            return np.inf
        val = float(np.sum(self.problem.flows / z)) + TIE_BREAK_WEIGHT * float(x.sum())
        val -= mu * float(np.sum(np.log(budget_slack)) + np.sum(np.log(rate_slack)))
        if x.size:
            val -= mu * float(np.sum(np.log(x)))
        return val

    def value_grad_hess(self, y: np.ndarray, mu: float):
        problem = self.problem
        nl, nq = problem.n_links, problem.n_transfers
        ptilde, x = self.split(y)
        budget_slack, rate_slack, x, z, w = self.slacks(y)
        exp_pt = np.exp(ptilde)
        u = problem.flows / z**2
        v = 2.0 * problem.flows / z**3
        a = np.eye(nl) - w

        val = float(np.sum(problem.flows / z)) + TIE_BREAK_WEIGHT * float(x.sum())
        val -= mu * float(np.sum(np.log(budget_slack)) + np.sum(np.log(rate_slack)))
        if nq:
            val -= mu * float(np.sum(np.log(x)))

        inv_budget = 1.0 / budget_slack
        inv_rate = 1.0 / rate_slack

        grad = np.empty(self.n_vars)
        # Delay gradient plus budget and rate barrier pulls on log powers.
        grad[:nl] = (
            -0.5 * u
            + 0.5 * (w @ u)
            + mu * exp_pt * (self.spend.T @ inv_budget)
            - 0.5 * mu * (a @ inv_rate)
        )
        if nq:
            grad[nl:] = (
                TIE_BREAK_WEIGHT + mu * (self.trade.T @ inv_budget) - mu / x
            )

        hess = np.zeros((self.n_vars, self.n_vars))
        # Objective curvature.
        h_pp = 0.25 * (a * v[None, :]) @ a.T
        h_pp += 0.5 * (np.diag(w @ u) - (w * u[None, :]) @ w.T)
        # Rate barrier: quadratic-over-slack plus margin curvature.
        h_pp += mu * 0.25 * (a * (inv_rate**2)[None, :]) @ a.T
        h_pp += mu * 0.5 * (np.diag(w @ inv_rate) - (w * inv_rate[None, :]) @ w.T)
        # Budget barrier: slack outer products plus the exp curvature of spend.
        spend_p = self.spend * exp_pt[None, :]
        h_pp += mu * (spend_p * (inv_budget**2)[:, None]).T @ spend_p
        h_pp += mu * np.diag(exp_pt * (self.spend.T @ inv_budget))
        hess[:nl, :nl] = h_pp
        if nq:
            cross = mu * (spend_p * (inv_budget**2)[:, None]).T @ self.trade
            hess[:nl, nl:] = cross
            hess[nl:, :nl] = cross.T
            h_xx = mu * (self.trade * (inv_budget**2)[:, None]).T @ self.trade
            h_xx += mu * np.diag(1.0 / x**2)
            hess[nl:, nl:] = h_xx
        return val, grad, hess


def _center(model: _BarrierModel, y: np.ndarray, mu: float):
    """Damped Newton to the mu-center; returns (point, steps, final decrement)."""
    decrement = np.inf
    for step_count in range(_MAX_NEWTON_PER_STAGE):
        val, grad, hess = model.value_grad_hess(y, mu)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = -grad
        slope = float(grad @ step)
        if slope >= 0:
            # Newton direction unusable; fall back to steepest descent.
            step = -grad
            slope = float(grad @ step)
            if slope >= 0:
                return y, step_count, 0.0
        decrement = -slope
        if 0.5 * decrement <= _NEWTON_DECREMENT_TOL:
            return y, step_count, decrement
        t = 1.0
        while model.value(y + t * step, mu) > val + _ARMIJO_SLOPE * t * slope:
            t *= _ARMIJO_SHRINK
            if t < 1e-20:
                return y, step_count, decrement
        y = y + t * step
    return y, _MAX_NEWTON_PER_STAGE, decrement


def _refined_multipliers(
    problem: SlotProblem,
    model: _BarrierModel,
    ptilde: np.ndarray,
    x: np.ndarray,
    mu: float,
) -> dict[int, float]:
    """Budget multipliers read off the stationarity equations at the final
    iterate rather than from mu/slack alone.

    Near a tight budget the barrier Hessian is enormous, so mu/slack inherits
    an O(sqrt(decrement/curvature)) slack error far above the iterate's own
    stationarity accuracy. The per-link marginal values -e^{-pt_l} dD/dpt_l
    give each transmitting node's multiplier directly; donor-only nodes chain
    through the transfer stationarity eta * lambda_recipient + mu/x - tie_break.
    """
    lam_hat = link_lambda_estimates(problem, ptilde)
    lam: dict[int, float] = {}
    for n in model.nodes:
        links = [l for l, src in enumerate(problem.link_sources) if src == n]
        if links:
            lam[n] = max(0.0, float(np.mean(lam_hat[links])))
    # Donors may chain (a donor feeding a donor), so sweep until stable.
    for _ in range(problem.n_transfers + 1):
        for n in model.nodes:
            estimates = [
                el.efficiency * lam.get(el.recipient, 0.0) + mu / x[q] - TIE_BREAK_WEIGHT
                for q, el in enumerate(problem.energy_links)
                if el.donor == n
            ]
            if estimates and not any(
                src == n for src in problem.link_sources
            ):
                lam[n] = max(0.0, float(np.mean(estimates)))
    for n in model.nodes:
        lam.setdefault(n, 0.0)
    return lam


def _solve(problem: SlotProblem, tol: float, start) -> "Solution":
    report = check_problem_feasible(
        problem, transfer=problem.n_transfers > 0, half_duplex=False
    )
    if not report.feasible:
        raise InfeasibleProblemError(report)
    model = _BarrierModel(problem)
    if start is not None:
        ptilde0 = np.asarray(start[0], dtype=float)
        x0 = np.asarray(start[1], dtype=float) if problem.n_transfers else np.zeros(0)
        y = np.concatenate([ptilde0, x0])
        if not model.interior(y):
            raise ValueError("starting point is not strictly interior")
    else:
        ptilde0, x0 = report.witness
        y = np.concatenate([ptilde0, x0[: problem.n_transfers]])

    mu = _MU_START
    total_steps = 0
    outer = 0
    termination = "converged"
    while True:
        y, steps, decrement = _center(model, y, mu)
        total_steps += steps
        outer += 1
        ptilde, x = model.split(y)
        obj = objective_logdomain(problem, ptilde)
        logger.info(
            "barrier stage %d: mu=%.3e objective=%.12g newton_steps=%d decrement=%.3e",
            outer,
            mu,
            obj,
            steps,
            decrement,
        )
        if model.n_constraints * mu < tol:
            if 0.5 * decrement > 1e-6:
                raise SolverError(
                    f"final barrier stage not centered (decrement {decrement:.3e})"
                )
            if steps >= _MAX_NEWTON_PER_STAGE:
                termination = "newton_budget_exhausted"
            break
        mu /= _MU_SHRINK

    ptilde, x = model.split(y)
    budget_slack, _, _, z, _ = model.slacks(y)
    power = PowerVector.from_log_powers(ptilde)
    lam = _refined_multipliers(problem, model, ptilde, x, mu)
    gamma = mu / x if x.size else np.zeros(0)
    capacities = capacity_approx_vector(problem.channel, ptilde)
    delays = problem.flows / (capacities - problem.flows)
    return Solution(
        problem=problem,
        power=power,
        transfers=x.copy(),
        objective=float(delays.sum()),
        sinr=sinr_vector(problem.channel, power.p),
        capacity_approx=capacities,
        capacity_exact=capacity_exact_vector(problem.channel, power.p),
        delays=delays,
        lambda_nodes=lam,
        beta=np.zeros(problem.n_links),
        gamma=gamma,
        slack_budget={n: float(s) for n, s in zip(model.nodes, budget_slack)},
        mu_final=mu,
        duality_gap=model.n_constraints * mu,
        newton_iterations=total_steps,
        outer_iterations=outer,
        termination=termination,
    )


@dataclass(frozen=True, eq=False)
class Solution:
    """Optimal slot allocation with barrier multiplier estimates.

    beta (rate-constraint multipliers) is identically zero: the delay objective
    diverges at the rate boundary, so that constraint never binds.
    """

    problem: SlotProblem
    power: PowerVector
    transfers: np.ndarray
    objective: float
    sinr: np.ndarray
    capacity_approx: np.ndarray
    capacity_exact: np.ndarray
    delays: np.ndarray
    lambda_nodes: dict[int, float]
    beta: np.ndarray
    gamma: np.ndarray
    slack_budget: dict[int, float]
    mu_final: float
    duality_gap: float
    newton_iterations: int
    outer_iterations: int
    termination: str


def solve_no_transfer(
    problem: SlotProblem, *, tol: float = DEFAULT_GAP_TOL, start=None
) -> Solution:
    """Minimize total delay over log powers only (transfers pinned to zero)."""
    return _solve(problem.without_transfer(), tol, start)


def solve_with_transfer(
    problem: SlotProblem, *, tol: float = DEFAULT_GAP_TOL, start=None
) -> Solution:
    """Minimize total delay jointly over log powers and energy transfers."""
    if problem.n_transfers == 0:
        raise ValueError("problem has no energy links; use solve_no_transfer")
    return _solve(problem, tol, start)


@dataclass(frozen=True, eq=False)
class KktReport:
    """Absolute first-order residuals of a solution.

    marginal_value_spread is the spread of the per-link multiplier
    estimates across nodes owning two or more active links (None when no
    node does); lambda_link_residual compares each link's estimate against
    its node's budget multiplier, NaN where the budget is slack.
    """

    stationarity_power: np.ndarray
    stationarity_transfer: np.ndarray
    comp_slack_budget: dict[int, float]
    comp_slack_rate: np.ndarray
    comp_slack_transfer: np.ndarray
    rate_multiplier_max: float
    marginal_value_spread: float | None
    lambda_link_residual: np.ndarray
    lambda_spread_max: float | None
    max_stationarity: float
    max_comp_slack: float


def kkt_report(problem: SlotProblem, solution: Solution) -> KktReport:
    """Recompute stationarity and complementary slackness at a solution."""
    ptilde = solution.power.ptilde
    grad = gradient_logdomain(problem, ptilde)
    lam_hat = -np.exp(-ptilde) * grad
    lam = solution.lambda_nodes

    stationarity_power = np.abs(
        grad
        + np.array([lam.get(src, 0.0) for src in problem.link_sources])
        * solution.power.p
    )
    stationarity_transfer = np.zeros(problem.n_transfers)
    for q, el in enumerate(problem.energy_links):
        stationarity_transfer[q] = abs(
            lam.get(el.donor, 0.0)
            - el.efficiency * lam.get(el.recipient, 0.0)
            - solution.gamma[q]
        )

    comp_budget = {
        n: abs(lam.get(n, 0.0) * s) for n, s in solution.slack_budget.items()
    }
    _, z, _ = _delay_parts(problem, ptilde)
    comp_rate = np.abs(solution.beta * (z - RATE_MARGIN))
    comp_transfer = (
        np.abs(solution.gamma * solution.transfers)
        if problem.n_transfers
        else np.zeros(0)
    )

    by_node: dict[int, list[int]] = {}
    for l, src in enumerate(problem.link_sources):
        by_node.setdefault(src, []).append(l)

    value_spread = None
    multi = [links for links in by_node.values() if len(links) >= 2]
    if multi:
        value_spread = max(
            float(np.ptp(lam_hat[links])) for links in multi
        )

    tight = {
        n
        for n, s in solution.slack_budget.items()
        if s <= 1e-4 * (1.0 + problem.node_energy[n])
    }
    lambda_residual = np.full(problem.n_links, np.nan)
    for l, src in enumerate(problem.link_sources):
        if src in tight:
            lambda_residual[l] = abs(lam_hat[l] - lam.get(src, 0.0))
    spreads = [
        float(np.ptp(lam_hat[links])) for n, links in by_node.items() if n in tight
    ]
    lambda_spread = max(spreads) if spreads else None

    max_stat = max(
        float(np.max(stationarity_power, initial=0.0)),
        float(np.max(stationarity_transfer, initial=0.0)),
    )
    max_comp = max(
        max(comp_budget.values(), default=0.0),
        float(np.max(comp_rate, initial=0.0)),
        float(np.max(comp_transfer, initial=0.0)),
    )
    return KktReport(
        stationarity_power=stationarity_power,
        stationarity_transfer=stationarity_transfer,
        comp_slack_budget=comp_budget,
        comp_slack_rate=comp_rate,
        comp_slack_transfer=comp_transfer,
        rate_multiplier_max=float(np.max(np.abs(solution.beta), initial=0.0)),
        marginal_value_spread=value_spread,
        lambda_link_residual=lambda_residual,
        lambda_spread_max=lambda_spread,
        max_stationarity=max_stat,
        max_comp_slack=max_comp,
    )
