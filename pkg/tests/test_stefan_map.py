import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nnlif.model import FiringRateSeries, Frame, ModelParams
from nnlif.stefan_map import (
    AlphaClock,
    FreeBoundary,
    advance_boundary,
    boundary_curve,
    boundary_from_rate_series,
    cumulative_accumulator,
    from_stefan,
    t_of_tau,
    tau_of_t,
    to_stefan,
)


@given(st.floats(0, 5))
def test_clock_round_trip(t):
    assert float(t_of_tau(tau_of_t(t))) == pytest.approx(t, rel=1e-12, abs=1e-15)
    c = AlphaClock.from_physical(t)
    assert c.alpha == pytest.approx(math.exp(-t), rel=1e-12)
    assert c.alpha * c.alpha_inv == pytest.approx(1.0)


def test_clock_rejects_negative_tau():
    with pytest.raises(ValueError):
        AlphaClock(-1e-3)


def test_accumulator_of_unit_rate():
    # int_0^1 sqrt(2 tau + 1) dtau = (3^{3/2} - 1) / 3
    taus = np.linspace(0.0, 1.0, 20001)
    acc = cumulative_accumulator(taus, np.ones_like(taus))
    assert acc[-1] == pytest.approx(1.3987, abs=1e-4)
    assert acc[-1] == pytest.approx((3**1.5 - 1) / 3, rel=1e-8)


def test_boundary_moves_with_drift_only_when_rate_vanishes():
    p = ModelParams(-1.0, 2.0, -1.0)
    taus = np.linspace(0, 2, 5)
    s = boundary_curve(taus, np.zeros(5), p)
    assert np.allclose(s, np.sqrt(2 * taus + 1) - 1)


@given(st.lists(st.floats(0, 5), min_size=2, max_size=30), st.floats(1e-3, 0.1))
def test_incremental_boundary_matches_batch(M, dtau):
    p = ModelParams(0.5, -0.7, -1.0)
    fb = FreeBoundary(p, M0=M[0])
    for m in M[1:]:
        advance_boundary(fb, m, dtau)
    batch = FreeBoundary.from_samples(p, fb.taus, np.array(M))
    assert np.allclose(fb.s, batch.s, rtol=1e-12, atol=1e-12)
    assert np.allclose(fb.s1 - fb.s, p.v_R * np.sqrt(2 * fb.taus + 1))


def test_boundary_snapshots_are_read_only():
    fb = FreeBoundary(ModelParams(0, 0, -1))
    with pytest.raises(ValueError):
        fb.s[0] = 1.0
    with pytest.raises(ValueError):
        advance_boundary(fb, -1.0, 0.1)


def test_round_trip_is_exact_on_carried_nodes(gaussian):
    p = ModelParams(-1.0, -1.0, -1.0)
    taus = np.linspace(0.0, 0.3, 31)
    fb = FreeBoundary.from_samples(p, taus, 0.2 + taus)
    st_ = gaussian.replace(time=float(t_of_tau(0.3)))
    u = to_stefan(st_, fb)
    assert u.frame is Frame.STEFAN
    assert u.grid.x_max == pytest.approx(fb.s[-1])
    assert u.mass == pytest.approx(st_.mass, rel=1e-12)
    back = from_stefan(u, fb)
    assert np.allclose(back.values, st_.values, rtol=1e-12, atol=1e-15)
    assert back.grid.x_min == pytest.approx(st_.grid.x_min)


def test_clock_mismatch_is_reported(gaussian):
    fb = FreeBoundary.from_samples(ModelParams(0, 0, -1), np.linspace(0, 0.1, 3), np.ones(3))
    with pytest.raises(ValueError, match="clock mismatch"):
        to_stefan(gaussian.replace(time=1.0), fb)


def test_boundary_from_rate_series_uses_alpha_squared():
    t = np.linspace(0, 1, 11)
    s = FiringRateSeries(Frame.PHYSICAL, t, np.ones_like(t))
    fb = boundary_from_rate_series(s, ModelParams(0, 1, -1))
    assert np.allclose(fb.M, np.exp(-2 * t))
    assert np.allclose(fb.taus, tau_of_t(t))
