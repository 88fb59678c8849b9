"""Change of variables between the Fokker-Planck problem and the free-boundary system.

With ``y = e^t v`` and ``tau = (e^{2t} - 1)/2`` the density becomes ``w(y, tau) = alpha p``
with ``alpha = e^{-t}``; shifting ``x = y + s(tau) - s_I`` turns the drift into a moving
threshold ``s`` and a moving reset curve ``s1 = s + v_R / alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .model import DensityState, FiringRateSeries, Frame, Grid1D, ModelParams


@dataclass(frozen=True)
class AlphaClock:
    tau: float

    def __post_init__(self) -> None:
        if not self.tau >= 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")

    @classmethod
    def from_physical(cls, t: float) -> "AlphaClock":
        return cls(0.5 * math.expm1(2.0 * t))

    @property
    def alpha(self) -> float:
        return 1.0 / math.sqrt(2.0 * self.tau + 1.0)

    @property
    def alpha_inv(self) -> float:
        return math.sqrt(2.0 * self.tau + 1.0)

    @property
    def t_phys(self) -> float:
        return 0.5 * math.log1p(2.0 * self.tau)


def tau_of_t(t):
    return 0.5 * np.expm1(2.0 * np.asarray(t, dtype=float))


def t_of_tau(tau):
    return 0.5 * np.log1p(2.0 * np.asarray(tau, dtype=float))


def alpha_inv(tau):
    return np.sqrt(2.0 * np.asarray(tau, dtype=float) + 1.0)


def boundary_curve(taus, acc, params: ModelParams, s_I: float = 0.0):
    """``s(tau)`` from the running integral ``acc = int_0^tau M alpha^{-1}``."""
    return s_I - params.b0 * (alpha_inv(taus) - 1.0) - params.b * np.asarray(acc)


def cumulative_accumulator(taus: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Trapezoidal ``int_0^tau M alpha^{-1}`` at every sample."""
    g = np.asarray(M) * alpha_inv(taus)
    acc = np.zeros_like(g)
    if g.size > 1:
        acc[1:] = np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(taus))
    return acc


class FreeBoundary:
    """Append-only log of ``s(tau)``, ``s1(tau)`` and the accumulator ``int M alpha^{-1}``.

    One writer appends through :func:`advance_boundary`; the array properties
    return read-only snapshots that can be shared.
    """

    def __init__(self, params: ModelParams, M0: float = 0.0, s_I: float = 0.0, tau0: float = 0.0):
        self.params = params
        self.s_I = float(s_I)
        self._cap = 64
        self._n = 0
        self._buf = np.zeros((4, self._cap))  # tau, M, acc, s
        self._append(float(tau0), float(M0), 0.0)

    @classmethod
    def from_samples(cls, params: ModelParams, taus, M, s_I: float = 0.0) -> "FreeBoundary":
        taus = np.asarray(taus, dtype=float)
        M = np.asarray(M, dtype=float)
        if taus[0] != 0.0:
            raise ValueError("boundary histories start at tau = 0")
        fb = cls(params, M0=M[0], s_I=s_I)
        acc = cumulative_accumulator(taus, M)
        fb._grow(taus.size)
        fb._buf[0, : taus.size] = taus
        fb._buf[1, : taus.size] = M
        fb._buf[2, : taus.size] = acc
        fb._buf[3, : taus.size] = boundary_curve(taus, acc, params, s_I)
        fb._n = taus.size
        return fb

    def _grow(self, need: int) -> None:
        if need > self._cap:
            new = max(need, 2 * self._cap)
            buf = np.zeros((4, new))
            buf[:, : self._n] = self._buf[:, : self._n]
            self._buf, self._cap = buf, new

    def _append(self, tau: float, M: float, acc: float) -> None:
        self._grow(self._n + 1)
        s = self.s_I - self.params.b0 * (math.sqrt(2.0 * tau + 1.0) - 1.0) - self.params.b * acc
        self._buf[:, self._n] = (tau, M, acc, s)
        self._n += 1

    def _view(self, row: int) -> np.ndarray:
        out = self._buf[row, : self._n].copy()
        out.setflags(write=False)
        return out

    def __len__(self) -> int:
        return self._n

    @property
    def taus(self) -> np.ndarray:
        return self._view(0)

    @property
    def M(self) -> np.ndarray:
        return self._view(1)

    @property
    def accumulator(self) -> np.ndarray:
        return self._view(2)

    @property
    def s(self) -> np.ndarray:
        return self._view(3)

    @property
    def s1(self) -> np.ndarray:
        return self._view(3) + self.params.v_R * alpha_inv(self._view(0))

    @property
    def tau_end(self) -> float:
        return float(self._buf[0, self._n - 1])

    def covers(self, tau: float) -> bool:
        return -1e-14 <= tau <= self.tau_end * (1 + 1e-12) + 1e-14

    def s_at(self, tau: float) -> float:
        if not self.covers(tau):
            raise ValueError(f"tau={tau:.6g} outside recorded boundary history [0, {self.tau_end:.6g}]")
        return float(np.interp(tau, self.taus, self.s))


def advance_boundary(fb: FreeBoundary, M_new: float, dtau: float) -> FreeBoundary:
    """Append one trapezoidal step of the accumulator and the matching ``s, s1`` samples."""
    if M_new < 0:
        raise ValueError(f"M must be nonnegative, got {M_new}")
    if not dtau > 0:
        raise ValueError("dtau must be positive")
    n = fb._n
    tau0, M0, acc0 = fb._buf[0, n - 1], fb._buf[1, n - 1], fb._buf[2, n - 1]
    tau1 = tau0 + dtau
    acc1 = acc0 + 0.5 * dtau * (M0 * math.sqrt(2 * tau0 + 1) + M_new * math.sqrt(2 * tau1 + 1))
    fb._append(tau1, float(M_new), acc1)
    return fb


def boundary_from_rate_series(series: FiringRateSeries, params: ModelParams, s_I: float = 0.0) -> FreeBoundary:
    """Global-frame boundary built from a physical rate series via ``M = alpha^2 N``."""
    if series.frame is not Frame.PHYSICAL:
        raise ValueError("expected a physical-frame rate series")
    t = series.times - series.times[0]
    taus = tau_of_t(t)
    M = series.rates * np.exp(-2.0 * t)
    return FreeBoundary.from_samples(params, taus, M, s_I)


def _resample(nodes: np.ndarray, values: np.ndarray, target: Grid1D) -> np.ndarray:
    spline = CubicSpline(nodes, values, bc_type="not-a-knot", extrapolate=False)
    out = spline(target.nodes)
    out = np.nan_to_num(out, nan=0.0)
    out = np.clip(out, 0.0, None)
    out[-1] = 0.0
    return out


def to_stefan(state: DensityState, fb: FreeBoundary, grid: Optional[Grid1D] = None) -> DensityState:
    """Map a physical density at time ``t`` (relative to the boundary's origin) to ``u(x, tau)``.

    Without ``grid`` the physical nodes are carried over exactly
    (``x = s + v / alpha``, values scaled by ``alpha``), so mass is preserved to
    round-off. With ``grid`` the result is cubic-interpolated and clamped at 0.
    """
    if state.frame is not Frame.PHYSICAL:
        raise ValueError("to_stefan expects a physical-frame state")
    clock = AlphaClock.from_physical(state.time)
    if not fb.covers(clock.tau):
        raise ValueError(
            f"clock mismatch: state time t={state.time:.6g} (tau={clock.tau:.6g}) "
            f"is outside the boundary history ending at tau={fb.tau_end:.6g}"
        )
    s = fb.s_at(clock.tau)
    a_inv = clock.alpha_inv
    g = state.grid
    mapped = Grid1D(s + g.x_min * a_inv, s, g.n_cells)
    vals = np.asarray(state.values) / a_inv
    if grid is not None:
        vals = _resample(mapped.nodes, vals, grid)
        mapped = grid
    return DensityState(Frame.STEFAN, clock.tau, mapped, vals)


def from_stefan(u: DensityState, fb: FreeBoundary, grid: Optional[Grid1D] = None) -> DensityState:
    """Inverse of :func:`to_stefan`; the boundary history must cover ``u.time``."""
    if u.frame is not Frame.STEFAN:
        raise ValueError("from_stefan expects a stefan-frame state")
    if not fb.covers(u.time):
        raise ValueError(f"tau={u.time:.6g} outside recorded boundary history [0, {fb.tau_end:.6g}]")
    clock = AlphaClock(u.time)
    s = fb.s_at(u.time)
    if abs(u.grid.x_max - s) > 1e-9 * max(1.0, abs(s)):
        raise ValueError(f"state domain ends at {u.grid.x_max:.6g}, boundary is at s={s:.6g}")
    a = clock.alpha
    g = u.grid
    mapped = Grid1D((g.x_min - g.x_max) * a, 0.0, g.n_cells)
    vals = np.asarray(u.values) / a
    if grid is not None:
        vals = _resample(mapped.nodes, vals, grid)
        mapped = grid
    return DensityState(Frame.PHYSICAL, clock.t_phys, mapped, vals)


@dataclass(frozen=True)
class EquivalenceReport:
    sup_norm: float
    l1: float
    rate_rel_err: float
    n_times: int

    def as_dict(self) -> dict:
        return {"sup_norm": self.sup_norm, "l1": self.l1, "rate_rel_err": self.rate_rel_err}


def equivalence_check(fp_result, stefan_result) -> EquivalenceReport:
    """Compare an fp run with a chained Stefan-frame solve at the window ends.

    ``stefan_result`` is a :class:`nnlif.volterra.ChainResult`; each window carries its
    own boundary history (the frame restarts at every window start), and its end
    state is mapped back with :func:`from_stefan` before comparison.
    """
    windows = getattr(stefan_result, "windows", [])
    if not windows:
        return EquivalenceReport(0.0, 0.0, 0.0, 0)
    sup = l1 = 0.0
    num = den = 0.0
    series = fp_result.rate_series
    for w in windows:
        phys = from_stefan(w.end_state, w.solution.boundary)
        t_abs = w.t0 + phys.time
        ref = _lookup_snapshot(fp_result, t_abs)
        if ref.grid.n_cells != phys.grid.n_cells:
            raise ValueError("grids differ between the two solves")
        diff = np.abs(np.asarray(phys.values) - np.asarray(ref.values))
        sup = max(sup, float(diff.max()))
        l1 = max(l1, float(ref.grid.spacing * (diff.sum() - 0.5 * (diff[0] + diff[-1]))))
        taus = w.solution.taus
        mapped = (1.0 / (2.0 * taus + 1.0)) * series.at(w.t0 + t_of_tau(taus))
        num = max(num, float(np.max(np.abs(w.solution.samples - mapped))))
        den = max(den, float(np.max(np.abs(mapped))))
    return EquivalenceReport(sup, l1, num / den if den > 0 else num, len(windows))


def _lookup_snapshot(fp_result, t: float) -> DensityState:
    snaps = fp_result.snapshots
    final = fp_result.final_state
    if abs(final.time - t) <= 1e-9 * max(1.0, t):
        return final
    for key, st in snaps.items():
        if abs(key - t) <= 1e-9 * max(1.0, t):
            return st
    raise ValueError(f"fp run has no snapshot at t={t:.9g}")
