import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehwsn.channel import (
    CapacityViolation,
    ChannelState,
    PowerVector,
    capacity_approx_vector,
    capacity_exact_vector,
    delay_vector,
    link_delay,
    sample_gains,
    sinr_vector,
    total_delay,
)


def test_single_link_frozen_values():
    ch = ChannelState(gains=np.array([[1.0]]), noise=np.array([1e-5]))
    p = np.array([2.0])
    assert sinr_vector(ch, p)[0] == pytest.approx(2e5, rel=1e-12)
    assert capacity_exact_vector(ch, p)[0] == pytest.approx(
        0.5 * math.log(1 + 2e5), rel=1e-12
    )
    assert capacity_approx_vector(ch, np.log(p))[0] == pytest.approx(
        0.5 * math.log(2e5), rel=1e-12
    )


def test_two_link_frozen_values():
    # interference at link 0 comes from transmitter 1 through gains[1, 0]
    ch = ChannelState(
        gains=np.array([[1.0, 0.01], [0.02, 1.0]]), noise=np.array([1e-5, 1e-5])
    )
    p = np.array([3.0, 4.0])
    s = sinr_vector(ch, p)
    assert s[0] == pytest.approx(3.0 / (1e-5 + 0.02 * 4.0), rel=1e-12)
    assert s[1] == pytest.approx(4.0 / (1e-5 + 0.01 * 3.0), rel=1e-12)


@given(seed=st.integers(min_value=0, max_value=10_000))
@settings(max_examples=50, deadline=None)
def test_underestimate_gap_identity(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    ch = sample_gains(rng, n)
    p = np.exp(rng.uniform(-2, 3, size=n))
    gap = capacity_exact_vector(ch, p) - capacity_approx_vector(ch, np.log(p))
    expected = 0.5 * np.log1p(1.0 / sinr_vector(ch, p))
    assert gap == pytest.approx(expected, abs=1e-12)
    assert np.all(gap > 0)


@given(
    seed=st.integers(min_value=0, max_value=10_000),
    scale=st.floats(min_value=1e-3, max_value=1e3),
)
@settings(max_examples=40, deadline=None)
def test_sinr_scale_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    ch = sample_gains(rng, 3)
    p = np.exp(rng.uniform(-2, 3, size=3))
    scaled = ChannelState(gains=ch.gains, noise=ch.noise * scale)
    assert sinr_vector(scaled, p * scale) == pytest.approx(
        sinr_vector(ch, p), rel=1e-9
    )


def test_capacity_approx_concave_in_log_power(rng):
    for _ in range(50):
        ch = sample_gains(rng, 3)
        a = rng.uniform(-2, 3, size=3)
        b = rng.uniform(-2, 3, size=3)
        mid = capacity_approx_vector(ch, 0.5 * (a + b))
        avg = 0.5 * (capacity_approx_vector(ch, a) + capacity_approx_vector(ch, b))
        assert np.all(mid >= avg - 1e-12)


def test_sample_gains_bounds(rng):
    ch = sample_gains(rng, 6, gain_high=0.01)
    off = ch.gains[~np.eye(6, dtype=bool)]
    assert np.all(np.diag(ch.gains) == 1.0)
    assert np.all(off > 0) and np.all(off <= 0.01)


def test_orthogonal_zeroes_interference(rng):
    ch = sample_gains(rng, 4)
    oc = ch.orthogonal()
    assert np.all(oc.gains[~np.eye(4, dtype=bool)] == 0)
    assert np.all(np.diag(oc.gains) == np.diag(ch.gains))
    p = np.full(4, 2.0)
    assert np.all(sinr_vector(oc, p) >= sinr_vector(ch, p))


def test_link_delay_and_violation():
    assert link_delay(0.5, 2.0) == pytest.approx(0.5 / 1.5)
    with pytest.raises(CapacityViolation):
        link_delay(2.0, 2.0)
    with pytest.raises(CapacityViolation):
        delay_vector(np.array([1.0, 3.0]), np.array([2.0, 2.5]))


def test_total_delay_sums_links():
    flows = np.array([0.4, 0.6])
    caps = np.array([2.0, 3.0])
    assert total_delay(flows, caps) == pytest.approx(0.4 / 1.6 + 0.6 / 2.4)


def test_power_vector_consistency_enforced():
    p = np.array([1.0, 2.0])
    pv = PowerVector.from_powers(p)
    assert pv.ptilde == pytest.approx(np.log(p))
    with pytest.raises(ValueError):
        PowerVector(p=p, ptilde=np.log(p) + 0.1)


def test_channel_state_validation():
    with pytest.raises(ValueError):
        ChannelState(gains=np.array([[1.0, 0.01]]), noise=np.array([1e-5]))
    with pytest.raises(ValueError):
        ChannelState(gains=np.array([[0.0]]), noise=np.array([1e-5]))
    with pytest.raises(ValueError):
        ChannelState(gains=np.array([[1.0]]), noise=np.array([0.0]))
