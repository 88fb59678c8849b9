import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from nnlif.model import Grid1D
from nnlif.spectrum import (
    HermitePoly,
    ThetaIntegral,
    admissible_roots_numpy,
    check_admissible,
    eigenfunction_residual,
    find_admissible_set,
    hermite,
    hermite_derivative,
    probe_eigenvalue,
    relaxation_to_steady_state,
    residual_grid,
    steady_state,
    steady_state_constant,
    steady_state_profile,
    theta,
    theta_ode,
)

SQRT6 = math.sqrt(6.0)


def _rodrigues(n):
    v = sympy.symbols("v")
    w = sympy.exp(-v**2 / 2)
    return sympy.Poly(sympy.simplify((-1) ** n * sympy.diff(w, v, n) / w), v)


@pytest.mark.parametrize("n", range(0, 11))
def test_recurrence_matches_rodrigues(n):
    ref = [int(c) for c in reversed(_rodrigues(n).all_coeffs())]
    assert list(HermitePoly(n).coefficients) == ref


@settings(max_examples=40)
@given(st.integers(0, 12), st.floats(-4, 4))
def test_hermite_derivative_identity(n, v):
    # He_n' = n He_{n-1}
    expected = n * hermite(n - 1, v) if n else 0.0
    assert hermite_derivative(n, v) == pytest.approx(expected, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4, 7, 10])
def test_roots_are_roots(n):
    r = HermitePoly(n).roots
    assert r.size == n
    assert np.max(np.abs(hermite(n, r))) <= 1e-9 * math.factorial(n)


def test_deflation_removes_the_root():
    H = HermitePoly(4)
    r = H.roots[0]
    v = np.linspace(-3, 3, 13)
    assert np.allclose(H.deflated(r, v) * (v - r), H(v), atol=1e-10)


def test_steady_state_constant_for_unit_reset():
    # 1 / int_{-1}^0 e^{w^2/2} dw
    assert steady_state_constant(-1.0) == pytest.approx(0.83685, abs=5e-6)
    ref = 1.0 / quad(lambda w: math.exp(0.5 * w * w), -1.0, 0.0, epsabs=1e-14)[0]
    assert steady_state_constant(-1.0) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=25)
@given(st.floats(-3, -0.2))
def test_steady_state_is_continuous_with_unit_flux_jump(v_R):
    h = 1e-6
    left, right = steady_state_profile([v_R - h, v_R + h], v_R)
    assert left == pytest.approx(right, rel=1e-4)
    d = lambda a, b: (steady_state_profile(b, v_R) - steady_state_profile(a, v_R)) / (b - a)
    jump = d(v_R + h, v_R + 2 * h) - d(v_R - 2 * h, v_R - h)
    # p'(0) = -alpha_0, and the jump at the reset equals it
    assert jump == pytest.approx(d(-h, 0.0), rel=1e-3)


def test_steady_state_state_has_unit_mass():
    g = Grid1D.to_threshold(-8.0, 800)
    assert steady_state(-1.0, g).mass == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_theta_matches_ode_route(n):
    v0 = 0.0 if n % 2 == 0 else -0.25
    v = np.linspace(-3.0, -0.01, 60)
    v = v[np.min(np.abs(v[:, None] - HermitePoly(n).roots[None, :]), axis=1) > 1e-2] if n > 1 else v
    a = ThetaIntegral(n, v0)(v)
    b = theta_ode(n, v, v0)
    assert np.max(np.abs(a - b)) <= 1e-9 * max(1.0, np.max(np.abs(b)))


def test_theta_is_smooth_across_roots():
    n = 4
    r = HermitePoly(n).roots
    r = r[r < 0][-1]
    h = 1e-7
    vals = theta(n, np.array([r - h, r, r + h]))
    assert abs(vals[0] - vals[1]) < 1e-5 and abs(vals[2] - vals[1]) < 1e-5


def test_admissible_set_matches_companion_roots():
    found = find_admissible_set(4)
    assert found[0] == (2, pytest.approx(-SQRT6, abs=1e-12))
    assert not [r for n, r in found if n == 1]
    for n in (2, 3, 4):
        ours = sorted(r for k, r in found if k == n)
        ref = sorted(admissible_roots_numpy(n))
        ref = [x for x in ref if -10 <= x < 0 and abs(hermite(2 * n, x)) > 0]
        assert np.allclose(ours, ref, atol=1e-10)


@given(st.floats(-10, -1e-3))
def test_lambda_minus_two_never_admissible(v_R):
    assert not check_admissible(1, v_R).admissible


def test_lambda_minus_four_only_at_root_six():
    assert check_admissible(2, -SQRT6).admissible
    assert check_admissible(2, -SQRT6 + 1e-11).admissible
    assert not check_admissible(2, -SQRT6 + 1e-8).admissible
    assert not check_admissible(2, -SQRT6 - 1e-6).admissible
    assert not check_admissible(2, -2.0).admissible


def test_eigenfunction_residuals_at_admissible_point():
    res = eigenfunction_residual(check_admissible(2, -SQRT6))
    assert res.all_passed, res


def test_perturbed_reset_breaks_the_jump_condition():
    good = eigenfunction_residual(check_admissible(2, -SQRT6))
    bad = eigenfunction_residual(check_admissible(2, -SQRT6 + 1e-2))
    assert bad.f4 >= 10 * good.f4
    assert not bad.passed["F4"]


def test_probe_flags_non_integer_eigenvalues():
    assert probe_eigenvalue(-4.0, -SQRT6).violated is False
    assert probe_eigenvalue(0.0, -1.0).violated is False
    assert probe_eigenvalue(-2.0, -1.0).violated
    assert probe_eigenvalue(-3.3, -SQRT6).violated


def test_relaxation_report_on_exact_exponential():
    g = Grid1D.to_threshold(-8.0, 400)
    p_inf = steady_state(-1.0, g)
    bump = np.exp(-(g.nodes + 2) ** 2) * (1 - np.exp(4 * g.nodes))
    states = []
    for t in np.linspace(0, 5, 21):
        vals = np.asarray(p_inf.values) + math.exp(-2 * t) * 0.1 * bump
        vals[-1] = 0.0
        states.append(p_inf.replace(time=float(t), values=vals))
    rep = relaxation_to_steady_state(states, -1.0, burn_in=1.0)
    assert rep.monotone_after_burn_in
    assert rep.rate == pytest.approx(2.0, rel=1e-6)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_residuals_converge_at_second_order(n):
    v_R = [r for k, r in find_admissible_set(n) if k == n][-1]
    cand = check_admissible(n, v_R)
    a = eigenfunction_residual(cand, residual_grid(v_R, spacing=1e-3))
    b = eigenfunction_residual(cand, residual_grid(v_R, spacing=5e-4))
    assert math.log2(a.ode / b.ode) == pytest.approx(2.0, abs=0.1)
    assert math.log2(a.f4 / b.f4) == pytest.approx(2.0, abs=0.1)


@pytest.mark.parametrize("n", [4, 6, 9])
def test_pole_free_remainder_series_matches_direct_form(n):
    th = ThetaIntegral(n, 0.3 if n % 2 else 0.0)
    for k, r in enumerate(th.roots):
        coef, radius = th._remainder_series(k)
        d = 0.9 * radius
        s = np.array([r + d, r - d])
        q = th.H.deflated(r, s)
        direct = (np.exp(0.5 * s * s) / (q * q) - th._A(k)) / d**2
        assert np.allclose(np.polynomial.polynomial.polyval(s - r, coef), direct, rtol=1e-9)
