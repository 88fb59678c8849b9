import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nnlif.model import (
    DensityState,
    FiringRateSeries,
    Frame,
    Grid1D,
    ModelParams,
    PhysicalParams,
    Profile,
    make_initial_density,
    mass,
    rescale,
    unrescale,
)


def test_rescale_worked_example():
    phys = PhysicalParams(cap_B=1.0, nu_ext=3.0, a0=2.0, v_th=1.0, v_L=-2.0, v_R_phys=-1.0)
    p = rescale(phys)
    assert (p.b0, p.b, p.v_R) == (1.0, 0.125, -1.0)
    assert p.physical is phys


@given(
    st.floats(-5, 5), st.floats(0.1, 10), st.floats(0.2, 3), st.floats(-2, 2),
    st.floats(0.05, 3), st.floats(0.05, 3),
)
def test_rescale_round_trip(cap_B, nu, a0, v_th, gap_R, gap_L):
    if abs(cap_B) < 1e-3:
        cap_B = 1e-3
    phys = PhysicalParams(cap_B, nu, a0, v_th, v_th - gap_R - gap_L, v_th - gap_R)
    back = unrescale(rescale(phys), a0, v_th, phys.v_L)
    for name in ("cap_B", "nu_ext", "v_R_phys"):
        assert math.isclose(getattr(back, name), getattr(phys, name), rel_tol=1e-9, abs_tol=1e-9)


def test_unrescale_without_coupling_needs_consistent_drive():
    with pytest.raises(ValueError, match="B = 0"):
        unrescale(ModelParams(1.0, 0.0, -1.0), a0=1.0, v_th=1.0, v_L=-3.0)
    ok = unrescale(ModelParams(-1.0, 0.0, -1.0), a0=1.0, v_th=1.0, v_L=-3.0, nu_ext=5.0)
    assert ok.nu_ext == 5.0


@pytest.mark.parametrize("v_R", [0.0, 0.5, math.nan])
def test_reset_must_sit_below_threshold(v_R):
    with pytest.raises(ValueError):
        ModelParams(0.0, 0.0, v_R)


def test_physical_voltage_ordering():
    with pytest.raises(ValueError, match="v_L < v_R_phys < v_th"):
        PhysicalParams(1.0, 1.0, 1.0, v_th=1.0, v_L=0.5, v_R_phys=0.0)
    with pytest.raises(ValueError, match="a0"):
        PhysicalParams(1.0, 1.0, 0.0, v_th=1.0, v_L=-1.0, v_R_phys=0.0)


def test_network_label():
    assert ModelParams(0, 1, -1).network == "excitatory"
    assert ModelParams(0, -1, -1).network == "inhibitory"
    assert ModelParams(0, 0, -1).network == "linear"


def test_grid_nodes_end_exactly_at_threshold():
    g = Grid1D.to_threshold(-8.0, 800)
    assert g.nodes[-1] == 0.0
    assert g.nodes.size == 801
    assert g.spacing == pytest.approx(1e-2)
    assert g.refined().n_cells == 1600


def test_grid_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Grid1D(0.0, -1.0, 10)
    with pytest.raises(ValueError):
        Grid1D(-1.0, 0.0, 1)


def test_density_state_validation(grid400):
    v = np.zeros(grid400.n_cells + 1)
    with pytest.raises(ValueError, match="shape"):
        DensityState(Frame.PHYSICAL, 0.0, grid400, v[:-1])
    bad = v.copy()
    bad[3] = -1e-3
    with pytest.raises(ValueError, match="negative"):
        DensityState(Frame.PHYSICAL, 0.0, grid400, bad)
    bad = v.copy()
    bad[-1] = 1.0
    with pytest.raises(ValueError, match="vanish"):
        DensityState(Frame.PHYSICAL, 0.0, grid400, bad)
    bad = v.copy()
    bad[5] = np.nan
    with pytest.raises(ValueError, match="finite"):
        DensityState(Frame.PHYSICAL, 0.0, grid400, bad)


def test_density_values_are_read_only(gaussian):
    with pytest.raises(ValueError):
        gaussian.values[0] = 1.0


@pytest.mark.parametrize("kind", Profile.KINDS)
def test_initial_density_has_unit_mass(kind, grid400):
    prof = Profile(kind, center=-2.0, width=0.5)
    st_ = make_initial_density(prof, grid400)
    assert mass(st_) == pytest.approx(1.0, abs=1e-14)
    assert st_.values[-1] == 0.0
    assert st_.derivative is not None


@settings(max_examples=40)
@given(st.sampled_from(Profile.KINDS), st.floats(-4, -0.5), st.floats(0.1, 2.0), st.floats(-7.5, -0.01))
def test_profile_derivative_matches_central_difference(kind, center, width, v):
    prof = Profile(kind, center, width)
    h = 1e-6
    fd = (prof(v + h) - prof(v - h)) / (2 * h)
    scale = max(1.0, abs(prof.derivative(v)), float(np.max(np.abs(prof(np.linspace(-8, 0, 201))))) / width)
    assert abs(fd - prof.derivative(v)) <= 1e-5 * scale


def test_profile_rejects_unknown_kind():
    with pytest.raises(ValueError, match="unknown profile"):
        Profile("boxcar")
    with pytest.raises(ValueError, match="width"):
        Profile("gaussian", width=0.0)


def test_rate_series_validation():
    with pytest.raises(ValueError, match="increasing"):
        FiringRateSeries(Frame.PHYSICAL, [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="nonnegative"):
        FiringRateSeries(Frame.PHYSICAL, [0.0, 1.0], [1.0, -1.0])
    s = FiringRateSeries(Frame.PHYSICAL, [0.0, 1.0], [0.0, 2.0])
    assert s.at(0.25) == pytest.approx(0.5)
    assert len(s) == 2
