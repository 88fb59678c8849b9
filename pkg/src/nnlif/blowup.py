"""Continuation up to the maximal existence time and detection of finite-time divergence."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import fp_solver
from .fp_solver import FPSchemeConfig, FokkerPlanckSolver, SchemeInstability
from .model import DensityState, Frame, Grid1D, ModelParams, Profile, make_initial_density
from .stefan_map import FreeBoundary, t_of_tau
from .volterra import WindowError, compute_sigma_window, solve_chain

logger = logging.getLogger(__name__)

GLOBAL = "global_horizon_reached"
BLOWUP = "blowup_detected"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DetectorConfig:
    """Divergence proxy and refinement policy.

    A run that crosses ``rate_cap`` is repeated with ``dt`` and ``dv`` halved
    ``refinements`` times; blow-up is reported only if the last two crossing
    times agree within ``cauchy_tol`` (relative).
    """

    rate_cap: float = 1e3
    refinements: int = 2
    cauchy_tol: float = 0.1
    backend: str = "fp"
    scheme: FPSchemeConfig = field(default_factory=lambda: FPSchemeConfig(rate_feedback="outflux"))
    steps_per_window: int = 100
    track_windows: bool = True
    max_windows: int = 200000

    def __post_init__(self) -> None:
        if self.backend not in ("fp", "volterra"):
            raise ValueError(f"backend must be fp or volterra, got {self.backend!r}")
        if not self.rate_cap > 0:
            raise ValueError("rate_cap must be positive")
        if self.refinements < 1:
            raise ValueError("at least one refinement is needed for the Cauchy test")


@dataclass(frozen=True, eq=False)
class ContinuationResult:
    regime: str
    t_star_estimate: float
    refinement_history: tuple
    rate_peak: float
    window_lengths: np.ndarray
    window_starts: np.ndarray
    rate_series: object = None
    message: str = ""

    @property
    def window_floor_ok(self) -> Optional[bool]:
        """``min window >= first window / 2``; ``None`` when no windows were tracked."""
        if self.window_lengths.size == 0:
            return None
        return bool(self.window_lengths.min() >= 0.5 * self.window_lengths[0])

    def as_dict(self) -> dict:
        return {
            "regime": self.regime,
            "t_star": self.t_star_estimate,
            "rate_peak": self.rate_peak,
            "refinement_history": [list(r) for r in self.refinement_history],
            "n_windows": int(self.window_lengths.size),
            "min_window": float(self.window_lengths.min()) if self.window_lengths.size else None,
            "first_window": float(self.window_lengths[0]) if self.window_lengths.size else None,
            "message": self.message,
        }


def _refine_initial(initial: DensityState, level: int) -> DensityState:
    grid = initial.grid
    fine = Grid1D(grid.x_min, grid.x_max, grid.n_cells * 2**level)
    if initial.profile is not None:
        return make_initial_density(initial.profile, fine, initial.time)
    vals = np.interp(fine.nodes, grid.nodes, initial.values)
    vals /= fine.spacing * (vals.sum() - 0.5 * (vals[0] + vals[-1]))
    return DensityState(Frame.PHYSICAL, initial.time, fine, vals)


def _fp_windowed(initial, params, horizon, cfg: DetectorConfig, scheme: FPSchemeConfig, track: bool):
    """fp run split at the certified window ends; returns (result, window lengths in physical time)."""
    solver = FokkerPlanckSolver(initial, params, scheme)
    log = fp_solver.new_log(solver)
    lengths, starts = [], []
    status, msg = "completed", ""
    tol = 1e-12 * max(1.0, horizon)
    try:
        if not track:
            status = solver.advance_to(horizon, cfg.rate_cap, log=log, record_every=10)
        while track and solver.t < horizon - tol:
            if len(lengths) >= cfg.max_windows:
                status, msg = "window_limit", f"stopped after {cfg.max_windows} windows"
                break
            p = solver.p
            sup = float(np.max(np.abs(np.gradient(p, solver.dv, edge_order=2))))
            win = compute_sigma_window(sup, params)
            length = float(t_of_tau(win.sigma))
            lengths.append(length)
            starts.append(solver.t)
            status = solver.advance_to(min(solver.t + length, horizon), cfg.rate_cap, log=log, record_every=10)
            if status != "completed":
                break
    except SchemeInstability as exc:
        status, msg = "unstable", str(exc)
    except WindowError as exc:
        status, msg = "window_failure", str(exc)
    return fp_solver.result_from_log(solver, log, status, msg), np.asarray(lengths), np.asarray(starts)


def _fp_crossing(initial, params, horizon, cfg: DetectorConfig, level: int):
    scheme = replace(cfg.scheme, dt=cfg.scheme.dt / 2**level)
    init = _refine_initial(initial, level) if level else initial
    res = fp_solver.run(init, params, scheme, horizon, rate_cap=cfg.rate_cap, record_every=10)
    return res, scheme.dt, init.grid.spacing


def _volterra_run(initial, params, horizon, cfg: DetectorConfig, level: int):
    steps = cfg.steps_per_window * 2**level
    chain = solve_chain(initial, params, horizon, steps_per_window=steps, rate_cap=cfg.rate_cap)
    t, n = chain.physical_rates()
    lengths = np.array([w.physical_length for w in chain.windows])
    starts = np.array([w.t0 for w in chain.windows])
    t_star = fp_solver.exceedance_time(t, n, cfg.rate_cap)
    return chain, t, n, lengths, starts, t_star


def continue_solution(
    initial: DensityState, params: ModelParams, horizon: float, detector: Optional[DetectorConfig] = None
) -> ContinuationResult:
    """Continue the solution to ``horizon`` or until the divergence proxy fires.

    Window lengths are the certified contraction windows measured at every
    window start; for ``b < 0`` they must stay bounded below.
    """
    cfg = detector or DetectorConfig()
    if not horizon > initial.time:
        raise ValueError("horizon must exceed the initial time")
    if cfg.backend == "volterra":
        return _continue_volterra(initial, params, horizon, cfg)

    base, lengths, starts = _fp_windowed(initial, params, horizon, cfg, cfg.scheme, cfg.track_windows)
    peak = base.rate_peak
    if base.status == "completed":
        return ContinuationResult(GLOBAL, math.inf, (), peak, lengths, starts, base.rate_series)
    if base.status != "rate_exceeded_threshold":
        return ContinuationResult(
            INCONCLUSIVE, math.nan, (), peak, lengths, starts, base.rate_series, f"{base.status}: {base.message}"
        )
    history = [(cfg.scheme.dt, initial.grid.spacing, float(base.t_exceeded))]
    for level in range(1, cfg.refinements + 1):
        res, dt, dv = _fp_crossing(initial, params, horizon, cfg, level)
        peak = max(peak, res.rate_peak)
        if res.status != "rate_exceeded_threshold":
            history.append((dt, dv, math.nan))
            return ContinuationResult(
                INCONCLUSIVE, math.nan, tuple(history), peak, lengths, starts, base.rate_series,
                f"refinement level {level} ended with status {res.status}",
            )
        history.append((dt, dv, float(res.t_exceeded)))
    return _judge(history, peak, lengths, starts, base.rate_series, cfg)


def _judge(history, peak, lengths, starts, series, cfg: DetectorConfig) -> ContinuationResult:
    t_prev, t_last = history[-2][2], history[-1][2]
    gap = abs(t_last - t_prev) / max(abs(t_last), 1e-300)
    if gap <= cfg.cauchy_tol:
        return ContinuationResult(BLOWUP, t_last, tuple(history), peak, lengths, starts, series)
    return ContinuationResult(
        INCONCLUSIVE, math.nan, tuple(history), peak, lengths, starts, series,
        f"crossing times not Cauchy under refinement (relative gap {gap:.3f} > {cfg.cauchy_tol})",
    )


def _continue_volterra(initial, params, horizon, cfg: DetectorConfig) -> ContinuationResult:
    chain, t, n, lengths, starts, t_star = _volterra_run(initial, params, horizon, cfg, 0)
    peak = float(n.max()) if n.size else 0.0
    series = (t, n)
    if chain.status == "completed":
        return ContinuationResult(GLOBAL, math.inf, (), peak, lengths, starts, series)
    if t_star is None:
        return ContinuationResult(INCONCLUSIVE, math.nan, (), peak, lengths, starts, series, chain.status)
    history = [(float(lengths.min()), initial.grid.spacing, t_star)]
    for level in range(1, cfg.refinements + 1):
        ch, _, nn, ll, _, ts = _volterra_run(initial, params, horizon, cfg, level)
        peak = max(peak, float(nn.max()) if nn.size else 0.0)
        if ts is None:
            history.append((float(ll.min()), initial.grid.spacing, math.nan))
            return ContinuationResult(INCONCLUSIVE, math.nan, tuple(history), peak, lengths, starts, series,
                                      f"refinement level {level} did not cross the cap")
        history.append((float(ll.min()) / 2**level, initial.grid.spacing, ts))
    return _judge(history, peak, lengths, starts, series, cfg)


# -- free-boundary monotonicity ---------------------------------------------


@dataclass(frozen=True)
class AuditResult:
    status: str  # pass | fail | skipped
    direction: Optional[str]
    first_violation: Optional[int] = None
    tau: Optional[float] = None
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def monotonicity_audit(fb: FreeBoundary, params: ModelParams) -> AuditResult:
    """Check that ``s`` moves strictly in the direction fixed by the common sign of ``b0`` and ``b``."""
    sb0, sb = np.sign(params.b0), np.sign(params.b)
    if sb0 * sb < 0 or (sb0 == 0 and sb == 0):
        return AuditResult("skipped", None, reason="not covered: b0 and b must share a nonzero sign")
    sign = sb0 if sb0 != 0 else sb
    direction = "increasing" if sign < 0 else "decreasing"
    ds = np.diff(fb.s) * (-sign)
    bad = np.flatnonzero(ds <= 0)
    if bad.size:
        k = int(bad[0]) + 1
        return AuditResult("fail", direction, k, float(fb.taus[k]))
    return AuditResult("pass", direction)


# -- parameter scan ------------------------------------------------------------


@dataclass(frozen=True)
class ScanSettings:
    b0: float = 0.0
    v_R: float = -1.0
    x_min: float = -4.0
    n_cells: int = 400
    horizon: float = 1.0
    # the scan family is a Gaussian of width w centred at -shift * w, so narrower
    # members sit closer to the threshold
    profile: str = "gaussian"
    shift: float = 3.0
    detector: DetectorConfig = field(default_factory=lambda: DetectorConfig(track_windows=False))


@dataclass(frozen=True)
class ScanRow:
    b: float
    width: float
    regime: str
    t_star: float
    rate_peak: float
    refinement_history: tuple
    message: str = ""


def scan_row(b: float, width: float, settings: ScanSettings) -> ScanRow:
    params = ModelParams(settings.b0, b, settings.v_R)
    grid = Grid1D.to_threshold(settings.x_min, settings.n_cells)
    init = make_initial_density(Profile(settings.profile, center=-settings.shift * width, width=width), grid)
    res = continue_solution(init, params, settings.horizon, settings.detector)
    return ScanRow(b, width, res.regime, res.t_star_estimate, res.rate_peak, res.refinement_history, res.message)


def _row_job(args):
    return scan_row(*args)


def worker_count(n_jobs: int) -> int:
    cap = os.environ.get("NNLIF_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"NNLIF_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(n, n_jobs))


@dataclass(frozen=True)
class ScanResult:
    rows: list
    trend_ok: bool
    trend_violations: list


def trend_check(rows: Sequence[ScanRow]) -> tuple:
    """Within each ``b``: narrower initial data must not blow up later nor peak lower."""
    violations = []
    for b in sorted({r.b for r in rows}):
        fam = sorted((r for r in rows if r.b == b), key=lambda r: r.width)
        for narrow, wide in zip(fam[:-1], fam[1:]):
            if narrow.regime == BLOWUP and wide.regime == BLOWUP and narrow.t_star > wide.t_star:
                violations.append(f"b={b}: t_star(width={narrow.width}) > t_star(width={wide.width})")
            if narrow.regime != BLOWUP and wide.regime == BLOWUP:
                violations.append(f"b={b}: width={wide.width} blows up but width={narrow.width} does not")
            if narrow.rate_peak < wide.rate_peak and BLOWUP not in (narrow.regime, wide.regime):
                violations.append(f"b={b}: rate_peak(width={narrow.width}) < rate_peak(width={wide.width})")
    return not violations, violations


def blowup_scan(b_values: Sequence[float], widths: Sequence[float], settings: Optional[ScanSettings] = None) -> ScanResult:
    """Run every ``(b, width)`` pair; rows are independent and fan out to worker processes."""
    settings = settings or ScanSettings()
    jobs = [(float(b), float(w), settings) for b in b_values for w in widths]
    if not jobs:
        return ScanResult([], True, [])
    n = worker_count(len(jobs))
    if n == 1:
        rows = [_row_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as ex:
            rows = list(ex.map(_row_job, jobs))
    ok, why = trend_check(rows)
    for v in why:
        logger.warning("trend violation: %s", v)
    return ScanResult(rows, ok, why)
