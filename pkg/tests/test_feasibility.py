import math

import numpy as np
import pytest

from conftest import random_slot_problem
from ehwsn.channel import ChannelState, capacity_approx_vector, capacity_exact_vector, sample_gains
from ehwsn.feasibility import (
    RateInfeasibleError,
    check_problem_feasible,
    min_power_vector,
    spectral_radius,
)
from ehwsn.problem import SlotProblem


def fixed_point_min_powers(channel, flows, *, iters=5000):
    """Independent route: iterate p <- threshold * (interference / gain)."""
    g = channel.gains
    n = len(flows)
    thr = np.expm1(2.0 * np.asarray(flows))
    p = np.ones(n)
    for _ in range(iters):
        interference = channel.noise.copy()
        for l in range(n):
            interference[l] += sum(g[k, l] * p[k] for k in range(n) if k != l)
        nxt = thr * interference / np.diag(g)
        if np.max(np.abs(nxt - p)) < 1e-16 * (1 + np.max(np.abs(nxt))):
            return nxt
        p = nxt
    return p


def test_single_link_min_power_frozen():
    ch = ChannelState(gains=np.array([[1.0]]), noise=np.array([1e-5]))
    p = min_power_vector(ch, np.array([0.8752]))
    assert p[0] == pytest.approx(math.expm1(2 * 0.8752) * 1e-5, rel=1e-12)


def test_min_power_matches_fixed_point(rng):
    for _ in range(100):
        n = int(rng.integers(1, 4))
        ch = sample_gains(rng, n)
        flows = 0.1 + 0.8 * rng.random(n)
        direct = min_power_vector(ch, flows)
        iterated = fixed_point_min_powers(ch, flows)
        assert direct == pytest.approx(iterated, rel=1e-10, abs=1e-18)


def test_min_power_achieves_exact_capacity(rng):
    ch = sample_gains(rng, 3)
    flows = np.array([0.3, 0.5, 0.7])
    p = min_power_vector(ch, flows)
    assert capacity_exact_vector(ch, p) == pytest.approx(flows, rel=1e-10)


def test_spectral_radius_bipartite():
    # power iteration must not stall on the oscillating 2-cycle
    m = np.array([[0.0, 0.3], [0.12, 0.0]])
    assert spectral_radius(m) == pytest.approx(math.sqrt(0.3 * 0.12), rel=1e-8)


def test_spectral_radius_diagonal():
    assert spectral_radius(np.diag([0.2, 0.9])) == pytest.approx(0.9, rel=1e-9)


def test_rate_infeasibility_detected():
    # symmetric pair: feasible iff thr * g_off < 1
    g_off = 0.5
    ch = ChannelState(
        gains=np.array([[1.0, g_off], [g_off, 1.0]]), noise=np.array([1e-5, 1e-5])
    )
    f_critical = 0.5 * math.log1p(1.0 / g_off)
    feasible_flows = np.full(2, f_critical - 1e-3)
    infeasible_flows = np.full(2, f_critical + 1e-3)
    assert np.all(min_power_vector(ch, feasible_flows) > 0)
    with pytest.raises(RateInfeasibleError) as err:
        min_power_vector(ch, infeasible_flows)
    assert err.value.spectral_radius > 1.0


def test_check_problem_feasible_reports_witness(rng):
    for _ in range(20):
        problem = random_slot_problem(rng, 2, with_transfer=True)
        report = check_problem_feasible(problem, transfer=True, half_duplex=False)
        assert report.feasible and report.rate_feasible
        assert report.spectral_radius < 1.0
        ptilde, x = report.witness  # stored in log-power form
        p = np.exp(ptilde)
        margins = capacity_approx_vector(problem.channel, ptilde) - problem.flows
        assert np.all(margins > 0)
        spend = {n: 0.0 for n in problem.node_energy}
        for l, src in enumerate(problem.link_sources):
            spend[src] += p[l]
        for q, el in enumerate(problem.energy_links):
            spend[el.donor] += x[q]
            spend[el.recipient] -= el.efficiency * x[q]
        for node, used in spend.items():
            assert used < problem.node_energy[node]


def test_budget_infeasibility_reported():
    ch = ChannelState(gains=np.array([[1.0]]), noise=np.array([1e-5]))
    problem = SlotProblem(
        link_ids=("1->0",),
        link_sources=(1,),
        flows=np.array([2.0]),  # needs ~e^4 * 1e-5 power, far above budget
        channel=ch,
        node_energy={1: 1e-4},
        energy_links=(),
    )
    report = check_problem_feasible(problem, transfer=False, half_duplex=False)
    assert report.rate_feasible and not report.feasible
    assert report.reasons


def test_rate_infeasible_problem_reported():
    ch = ChannelState(
        gains=np.array([[1.0, 0.9], [0.9, 1.0]]), noise=np.array([1e-5, 1e-5])
    )
    problem = SlotProblem(
        link_ids=("1->0", "2->0"),
        link_sources=(1, 2),
        flows=np.array([1.5, 1.5]),
        channel=ch,
        node_energy={1: 10.0, 2: 10.0},
        energy_links=(),
    )
    report = check_problem_feasible(problem, transfer=False, half_duplex=False)
    assert not report.rate_feasible and not report.feasible
    assert report.spectral_radius >= 1.0
