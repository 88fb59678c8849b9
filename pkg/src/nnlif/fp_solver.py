"""Conservative finite-difference solver for the dimensionless Fokker-Planck problem.

The unknowns are node values ``p_0 .. p_n`` on ``[x_min, 0]`` with ``p_0 = p_n = 0``.
Each interior node owns a control volume of width ``dv``; fluxes live on the faces
between nodes. Mass leaving through the face next to the threshold is put back at
``v_R`` in the same step, so the discrete mass is conserved to round-off (up to the
leak through the far-left Dirichlet face, which is tracked separately).
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import lapack

from .model import DensityState, FiringRateSeries, Frame, ModelParams

NEG_TOL = 1e-8
RATE_TOL = 1e-6
RATE_CLAMP = 1e-6
DEFAULT_RATE_CAP = 1e3


class SchemeInstability(RuntimeError):
    pass


@dataclass(frozen=True)
class FPSchemeConfig:
    """Discretization choices.

    ``diffusion_cfl`` is the constant C in ``dt <= C dv^2``, enforced only when the
    diffusion is explicit. ``drift_cfl`` bounds ``dt |v - mu| / dv``; steps that would
    violate it are split into power-of-two substeps.

    ``rate_feedback`` selects the rate fed back into the drift: the one-sided
    stencil for ``-p_v(0)`` or the discrete outflux through the last face. The
    stencil saturates once the boundary layer is thinner than a cell, so runs
    that probe divergence use the outflux.
    """

    dt: float = 1e-5
    drift_treatment: str = "semi-implicit"
    flux_stencil_order: int = 2
    delta_deposit: str = "linear-split"
    drift_reconstruction: str = "muscl"
    diffusion_cfl: float = 0.5
    drift_cfl: float = 0.5
    max_substep_level: int = 24
    rate_feedback: str = "stencil"

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.drift_treatment not in ("explicit", "semi-implicit"):
            raise ValueError(f"drift_treatment must be explicit or semi-implicit, got {self.drift_treatment!r}")
        if self.flux_stencil_order not in (1, 2):
            raise ValueError(f"flux_stencil_order must be 1 or 2, got {self.flux_stencil_order}")
        if self.delta_deposit not in ("nearest-cell", "linear-split", "disabled"):
            raise ValueError(f"unknown delta_deposit {self.delta_deposit!r}")
        if self.drift_reconstruction not in ("upwind", "muscl"):
            raise ValueError(f"unknown drift_reconstruction {self.drift_reconstruction!r}")
        if self.rate_feedback not in ("stencil", "outflux"):
            raise ValueError(f"rate_feedback must be stencil or outflux, got {self.rate_feedback!r}")
        if not (0 < self.drift_cfl <= 1 and self.diffusion_cfl > 0):
            raise ValueError("CFL constants out of range")

    def check_grid(self, dv: float) -> None:
        if self.drift_treatment == "explicit" and self.dt > self.diffusion_cfl * dv * dv:
            raise ValueError(
                f"explicit diffusion needs dt <= {self.diffusion_cfl} dv^2 = "
                f"{self.diffusion_cfl * dv * dv:.3e}, got dt={self.dt:.3e}"
            )


def _rate_from_values(p: np.ndarray, dv: float, order: int) -> float:
    if order == 1:
        r = p[-2] / dv
    else:
        r = (4.0 * p[-2] - p[-3]) / (2.0 * dv)
    if r < -RATE_TOL:
        raise SchemeInstability(f"firing rate {r:.3e} is below -{RATE_TOL:g}")
    return max(r, 0.0)


def firing_rate(state: DensityState, order: int = 2) -> float:
    """One-sided difference approximation of ``-p_v(0)``.

    Small negative values (down to ``-1e-6``) are clamped to 0; anything lower
    signals a scheme breakdown.
    """
    if state.frame is not Frame.PHYSICAL:
        raise ValueError("firing_rate expects a physical-frame state")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    return _rate_from_values(np.asarray(state.values), state.grid.spacing, order)


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


@dataclass(frozen=True)
class StepRecord:
    dt: float
    substeps: int
    deposited: float
    outflux_rate: float
    leaked: float


@dataclass(eq=False)
class FPRunResult:
    final_state: DensityState
    rate_series: FiringRateSeries
    mass_series: tuple
    status: str
    deposited: float = 0.0
    leaked: float = 0.0
    n_steps: int = 0
    t_exceeded: Optional[float] = None
    snapshots: dict = field(default_factory=dict)
    message: str = ""

    @property
    def rate_peak(self) -> float:
        return float(self.rate_series.rates.max()) if len(self.rate_series) else 0.0


class FokkerPlanckSolver:
    """Stateful stepping engine; one instance owns one evolving density."""

    def __init__(self, initial: DensityState, params: ModelParams, cfg: FPSchemeConfig):
        if initial.frame is not Frame.PHYSICAL:
            raise ValueError("fp solver runs in the physical frame")
        grid = initial.grid
        if grid.x_max != 0.0:
            raise ValueError("grid must end at the threshold v = 0")
        dv = grid.spacing
        cfg.check_grid(dv)
        if not (grid.x_min + dv <= params.v_R <= -dv):
            raise ValueError("v_R must lie at least one cell inside the grid")
        self.params, self.cfg, self.grid, self.dv = params, cfg, grid, dv
        self.v = grid.nodes
        self.faces = self.v[:-1] + 0.5 * dv
        self.p = np.array(initial.values, dtype=float)
        self.t = float(initial.time)
        self.weights = self._deposit_weights()
        self._factors: OrderedDict = OrderedDict()
        self.rate = _rate_from_values(self.p, dv, cfg.flux_stencil_order)
        self.deposited = 0.0
        self.leaked = 0.0
        self.n_steps = 0
        self.cap = math.inf

    def _deposit_weights(self) -> np.ndarray:
        w = np.zeros(self.grid.n_cells + 1)
        if self.cfg.delta_deposit == "disabled":
            return w[1:-1]
        k = (self.params.v_R - self.grid.x_min) / self.dv
        if self.cfg.delta_deposit == "nearest-cell":
            w[int(round(k))] = 1.0
        else:
            i0 = int(math.floor(k))
            theta = k - i0
            if theta < 1e-12:
                w[i0] = 1.0
            elif theta > 1 - 1e-12:
                w[i0 + 1] = 1.0
            else:
                w[i0], w[i0 + 1] = 1.0 - theta, theta
        return w[1:-1]

    def _factor(self, h: float):
        key = float(h)
        if key in self._factors:
            self._factors.move_to_end(key)
            return self._factors[key]
        c = h / self.dv**2
        m = self.grid.n_cells - 1
        d, e, info = lapack.dpttrf(np.full(m, 1.0 + 2.0 * c), np.full(m - 1, -c))
        if info != 0:
            raise SchemeInstability(f"tridiagonal factorization failed (info={info})")
        z, info = lapack.dpttrs(d, e, self.weights)
        fac = (d, e, z, c)
        self._factors[key] = fac
        if len(self._factors) > 8:
            self._factors.popitem(last=False)
        return fac

    def _advective_flux(self, mu: float) -> np.ndarray:
        p = self.p
        a = mu - self.faces
        if self.cfg.drift_reconstruction == "muscl":
            d = np.diff(p)
            slope = np.zeros_like(p)
            slope[1:-1] = _minmod(d[:-1], d[1:])
            left = p[:-1] + 0.5 * slope[:-1]
            right = p[1:] - 0.5 * slope[1:]
        else:
            left, right = p[:-1], p[1:]
        return np.where(a > 0.0, a * left, a * right)

    def _substep(self, h: float) -> tuple:
        dv = self.dv
        mu = self.params.mu(self.rate)
        F = self._advective_flux(mu)
        adv = -(F[1:] - F[:-1]) / dv
        out_adv = max(F[-1], 0.0)
        leak_adv = max(-F[0], 0.0)
        q = self.p[1:-1]
        if self.cfg.drift_treatment == "semi-implicit":
            d, e, z, c = self._factor(h)
            rhs = q + h * adv + self.weights * (h * out_adv / dv)
            y, info = lapack.dpttrs(d, e, rhs)
            if info != 0:
                raise SchemeInstability(f"tridiagonal solve failed (info={info})")
            last = y[-1] / (1.0 - c * z[-1])
            qn = y + (c * y[-1] / (1.0 - c * z[-1])) * z
            out_rate = out_adv + last / dv
            leak = h * (qn[0] / dv + leak_adv)
        else:
            p = self.p
            lap = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / dv**2
            out_rate = out_adv + q[-1] / dv
            qn = q + h * (lap + adv) + self.weights * (h * out_rate / dv)
            leak = h * (q[0] / dv + leak_adv)
        if not np.all(np.isfinite(qn)):
            raise SchemeInstability(f"non-finite density at t={self.t + h:.6g}")
        qmin = qn.min()
        if qmin < -NEG_TOL:
            raise SchemeInstability(f"density negative ({qmin:.3e}) at t={self.t + h:.6g}")
        if qmin < 0.0:
            np.maximum(qn, 0.0, out=qn)
        self.p[1:-1] = qn
        deposited = h * out_rate if self.weights.any() else 0.0
        if self.cfg.rate_feedback == "outflux":
            self.rate = max(out_rate, 0.0)
        else:
            self.rate = _rate_from_values(self.p, dv, self.cfg.flux_stencil_order)
        return deposited, out_rate, leak

    def _allowed_step(self) -> float:
        mu = self.params.mu(self.rate)
        amax = max(abs(mu - self.grid.x_min), abs(mu) + self.dv)
        return self.cfg.drift_cfl * self.dv / amax

    def step(self, h: Optional[float] = None) -> StepRecord:
        """Advance by ``h`` (default ``cfg.dt``), splitting into substeps if the drift CFL demands."""
        h = self.cfg.dt if h is None else float(h)
        remaining, level, count = h, 0, 0
        deposited = leaked = 0.0
        out_rate = 0.0
        while remaining > 0.0:
            allowed = self._allowed_step()
            while h / 2**level > allowed and level < self.cfg.max_substep_level:
                level += 1
            if h / 2**level > allowed:
                raise SchemeInstability(f"drift CFL unattainable at t={self.t:.6g} (rate {self.rate:.3e})")
            hs = min(h / 2**level, remaining)
            if remaining - hs < 1e-12 * h:
                hs = remaining
            dep, out_rate, lk = self._substep(hs)
            deposited += dep
            leaked += lk
            remaining -= hs
            self.t += hs
            count += 1
            if self.rate > self.cap:
                break  # divergence proxy reached mid-step
        self.deposited += deposited
        self.leaked += leaked
        self.n_steps += 1
        return StepRecord(h, count, deposited, out_rate, leaked)

    def state(self) -> DensityState:
        p = self.p.copy()
        p[-1] = 0.0
        return DensityState(Frame.PHYSICAL, self.t, self.grid, p)

    def mass(self) -> float:
        p = self.p
        return float(self.dv * (p.sum() - 0.5 * (p[0] + p[-1])))

    def advance_to(
        self,
        t_end: float,
        rate_cap: float = math.inf,
        checkpoints: Sequence[float] = (),
        record_every: int = 1,
        log: Optional[dict] = None,
    ) -> str:
        """Step until ``t_end`` or until the rate exceeds ``rate_cap``.

        Steps are shortened to land exactly on every checkpoint; the states there
        are stored in ``log['snapshots']``.
        """
        dt = self.cfg.dt
        self.cap = rate_cap
        tol = 1e-12 * max(1.0, abs(t_end))
        targets = sorted(c for c in checkpoints if self.t + tol < c < t_end - tol) + [t_end]
        k = 0
        for target in targets:
            while self.t < target - tol:
                h = min(dt, target - self.t)
                if target - (self.t + h) < tol:
                    h = target - self.t
                self.step(h)
                if abs(self.t - target) < tol:
                    self.t = target
                k += 1
                if log is not None and (k % record_every == 0 or self.t >= t_end - tol or self.rate > rate_cap):
                    log["t"].append(self.t)
                    log["rate"].append(self.rate)
                    log["mass"].append(self.mass())
                if self.rate > rate_cap:
                    return "rate_exceeded_threshold"
            if log is not None and target != t_end:
                log["snapshots"][target] = self.state()
        return "completed"


def new_log(solver: FokkerPlanckSolver) -> dict:
    return {"t": [solver.t], "rate": [solver.rate], "mass": [solver.mass()], "snapshots": {}}


def result_from_log(solver: FokkerPlanckSolver, log: dict, status: str, message: str = "") -> FPRunResult:
    t = np.asarray(log["t"])
    rate = np.asarray(log["rate"])
    keep = np.concatenate([[True], np.diff(t) > 0])
    t_exc = None
    if status == "rate_exceeded_threshold":
        t_exc = exceedance_time(t, rate, solver.cap)
    return FPRunResult(
        final_state=solver.state(),
        rate_series=FiringRateSeries(Frame.PHYSICAL, t[keep], rate[keep]),
        mass_series=(t[keep], np.asarray(log["mass"])[keep]),
        status=status,
        deposited=solver.deposited,
        leaked=solver.leaked,
        n_steps=solver.n_steps,
        t_exceeded=t_exc,
        snapshots=dict(log["snapshots"]),
        message=message,
    )


def exceedance_time(t: np.ndarray, rate: np.ndarray, cap: float) -> Optional[float]:
    """First crossing of ``cap``, linearly interpolated between samples."""
    idx = np.flatnonzero(rate > cap)
    if idx.size == 0:
        return None
    k = int(idx[0])
    if k == 0:
        return float(t[0])
    r0, r1 = rate[k - 1], rate[k]
    return float(t[k - 1] + (cap - r0) / (r1 - r0) * (t[k] - t[k - 1]))


def step(state: DensityState, params: ModelParams, cfg: FPSchemeConfig) -> DensityState:
    """Advance ``state`` by one ``cfg.dt`` using the rate of ``state`` in the drift."""
    solver = FokkerPlanckSolver(state, params, cfg)
    solver.step()
    return solver.state()


def run(
    initial: DensityState,
    params: ModelParams,
    cfg: FPSchemeConfig,
    horizon: float,
    rate_cap: float = DEFAULT_RATE_CAP,
    checkpoints: Sequence[float] = (),
    record_every: int = 1,
) -> FPRunResult:
    """Integrate from ``initial.time`` to ``horizon`` (an absolute time)."""
    if not horizon > initial.time:
        raise ValueError("horizon must exceed the initial time")
    if not rate_cap > 0:
        raise ValueError("rate_cap must be positive")
    solver = FokkerPlanckSolver(initial, params, cfg)
    log = new_log(solver)
    try:
        status = solver.advance_to(horizon, rate_cap, checkpoints, record_every, log)
        msg = ""
    except SchemeInstability as exc:
        status, msg = "unstable", str(exc)
    return result_from_log(solver, log, status, msg)


def conservation_report(result: FPRunResult) -> float:
    masses = np.asarray(result.mass_series[1])
    if masses.size == 0:
        return 0.0
    return float(np.max(np.abs(masses - 1.0)))
