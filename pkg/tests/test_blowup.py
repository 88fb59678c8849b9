import math

import numpy as np
import pytest

from nnlif import blowup
from nnlif.blowup import (
    BLOWUP,
    GLOBAL,
    INCONCLUSIVE,
    DetectorConfig,
    ScanRow,
    ScanSettings,
    continue_solution,
    monotonicity_audit,
    scan_row,
    trend_check,
    worker_count,
)
from nnlif.fp_solver import FPSchemeConfig
from nnlif.model import Grid1D, ModelParams, Profile, make_initial_density
from nnlif.stefan_map import FreeBoundary

FAST = DetectorConfig(scheme=FPSchemeConfig(dt=2e-5, rate_feedback="outflux"), track_windows=False)


def _fb(params, M):
    taus = np.linspace(0, 1, len(M))
    return FreeBoundary.from_samples(params, taus, np.asarray(M, float))


def test_audit_direction_follows_common_sign():
    inh = ModelParams(-1, -1, -1)
    exc = ModelParams(0.5, 0.5, -1)
    assert monotonicity_audit(_fb(inh, np.ones(20)), inh) == blowup.AuditResult("pass", "increasing")
    assert monotonicity_audit(_fb(exc, np.ones(20)), exc).direction == "decreasing"


def test_audit_skips_mixed_signs_and_reports_violations():
    mixed = ModelParams(1, -1, -1)
    res = monotonicity_audit(_fb(mixed, np.ones(5)), mixed)
    assert res.status == "skipped" and not res.passed
    p = ModelParams(0.5, 0.5, -1)
    # a negative rate pushes the boundary the wrong way
    res = monotonicity_audit(_fb(p, -10 * np.ones(10)), p)
    assert res.status == "fail" and res.first_violation == 1 and res.tau > 0


def _row(b, w, regime, t_star, peak):
    return ScanRow(b, w, regime, t_star, peak, ())


def test_trend_check_accepts_earlier_blowup_for_narrower_data():
    ok, why = trend_check([_row(1, 0.05, BLOWUP, 0.1, 1e3), _row(1, 0.1, BLOWUP, 0.2, 1e3), _row(1, 0.2, GLOBAL, math.inf, 5)])
    assert ok and not why


def test_trend_check_reports_reversals():
    ok, why = trend_check([_row(1, 0.05, BLOWUP, 0.3, 1e3), _row(1, 0.1, BLOWUP, 0.2, 1e3)])
    assert not ok and "t_star" in why[0]
    ok, why = trend_check([_row(2, 0.05, GLOBAL, math.inf, 1), _row(2, 0.1, BLOWUP, 0.2, 1e3)])
    assert not ok


def test_worker_count_honours_environment(monkeypatch):
    monkeypatch.setenv("NNLIF_THREADS", "1")
    assert worker_count(12) == 1
    monkeypatch.setenv("NNLIF_THREADS", "many")
    with pytest.raises(ValueError, match="NNLIF_THREADS"):
        worker_count(3)
    monkeypatch.delenv("NNLIF_THREADS")
    assert 1 <= worker_count(2) <= 2


def test_detector_validation():
    with pytest.raises(ValueError):
        DetectorConfig(backend="spectral")
    with pytest.raises(ValueError):
        DetectorConfig(refinements=0)
    with pytest.raises(ValueError):
        DetectorConfig(rate_cap=0)


def test_inhibitory_run_reaches_horizon_with_stable_windows():
    g = Grid1D.to_threshold(-8.0, 200)
    init = make_initial_density(Profile("gaussian", center=-2.0, width=0.5), g)
    det = DetectorConfig(scheme=FPSchemeConfig(dt=1e-4, rate_feedback="outflux"))
    res = continue_solution(init, ModelParams(-1, -1, -1), 0.2, det)
    assert res.regime == GLOBAL and res.t_star_estimate == math.inf
    assert res.window_floor_ok
    assert np.all(np.diff(res.window_starts) > 0)
    assert res.as_dict()["n_windows"] == res.window_lengths.size


def test_excitatory_narrow_data_blows_up_with_cauchy_times():
    s = ScanSettings(n_cells=200, horizon=1.0, detector=FAST)
    row = scan_row(4.0, 0.1, s)
    assert row.regime == BLOWUP
    times = [h[2] for h in row.refinement_history]
    assert len(times) == 3
    assert abs(times[-1] - times[-2]) <= 0.1 * times[-1]
    dts = [h[0] for h in row.refinement_history]
    assert dts == sorted(dts, reverse=True)


def test_empty_scan_is_trivially_consistent():
    res = blowup.blowup_scan([], [0.1])
    assert res.rows == [] and res.trend_ok


def test_horizon_must_lie_ahead(gaussian):
    with pytest.raises(ValueError):
        continue_solution(gaussian, ModelParams(0, 1, -1), 0.0)


def test_inconclusive_when_refinement_disagrees():
    history = [(1e-4, 1e-2, 0.1), (5e-5, 5e-3, 0.5)]
    res = blowup._judge(history, 1e3, np.zeros(0), np.zeros(0), None, DetectorConfig())
    assert res.regime == INCONCLUSIVE and math.isnan(res.t_star_estimate)
    assert res.window_floor_ok is None
