"""Heat-kernel integral formulation of the free-boundary system.

The firing rate solves a weakly singular Volterra equation of the second kind,
``M = T(M)``, with three terms: a data term from the initial density, a
self-interaction along the threshold curve ``s`` and the reset feedback along
``s1``. ``T`` is iterated inside a certified window, the density is recovered
from the Duhamel representation, and windows are chained by restarting the
change of variables at every window end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import exp1, ndtr

from .model import DensityState, Frame, Grid1D, ModelParams
from .stefan_map import (
    FreeBoundary,
    alpha_inv,
    from_stefan,
    t_of_tau,
    tau_of_t,
)

SQRT_PI = math.sqrt(math.pi)
INV_SQRT_4PI = 1.0 / math.sqrt(4.0 * math.pi)
SIGMA_FLOOR = 1e-12
SIGMA_MAX = 1.5  # alpha^{-1}(sigma) <= 2
CONTRACTION_LIMIT = 0.6


class WindowError(RuntimeError):
    pass


class PicardFailure(RuntimeError):
    def __init__(self, message: str, ratios):
        super().__init__(message)
        self.ratios = list(ratios)


# -- heat kernel -------------------------------------------------------------


def _kernel_args(x, t, xi, tau):
    x, t, xi, tau = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, t, xi, tau)))
    dt = t - tau
    if np.any(dt <= 0):
        raise ValueError("heat kernel needs t > tau")
    return x - xi, dt


def _out(a):
    return float(a) if np.ndim(a) == 0 else a


def green(x, t, xi, tau):
    d, dt = _kernel_args(x, t, xi, tau)
    return _out(INV_SQRT_4PI / np.sqrt(dt) * np.exp(-d * d / (4.0 * dt)))


def green_x(x, t, xi, tau):
    d, dt = _kernel_args(x, t, xi, tau)
    return _out(-d / (2.0 * dt) * INV_SQRT_4PI / np.sqrt(dt) * np.exp(-d * d / (4.0 * dt)))


def green_x_bound(x, t, xi, tau):
    """Majorant ``(4 pi)^{-1/2} (t-tau)^{-1} exp(-|x-xi|^2 / 8(t-tau))`` of ``|G_x|``."""
    d, dt = _kernel_args(x, t, xi, tau)
    return _out(INV_SQRT_4PI / dt * np.exp(-d * d / (8.0 * dt)))


@dataclass(frozen=True)
class HeatKernelEval:
    x: float
    t: float
    xi: float
    tau: float

    def __post_init__(self) -> None:
        if not self.t > self.tau:
            raise ValueError("heat kernel needs t > tau")

    @property
    def value(self) -> float:
        return green(self.x, self.t, self.xi, self.tau)

    @property
    def derivative(self) -> float:
        return green_x(self.x, self.t, self.xi, self.tau)


# -- contraction window ------------------------------------------------------


def reset_separation(sigma: float, m: float, params: ModelParams) -> float:
    """Lower bound ``Lambda`` on ``s(t) - s1(tau)`` over a window of length ``sigma``.

    For ``b > 0`` the threshold can move towards the reset curve at speed
    ``|b0| + 2 b m``; the coefficient ``max(1, 2b) m`` covers that and the
    weaker ``m`` variant at once.
    """
    lip = abs(params.b0)
    if params.b > 0:
        lip += max(1.0, 2.0 * params.b) * m
    return abs(params.v_R) - lip * sigma


def window_conditions(sigma: float, m: float, params: ModelParams) -> dict:
    """Evaluate the four window conditions; returns values and pass flags."""
    c1 = math.sqrt(1.0 + 2.0 * sigma)
    c2 = m * (abs(params.b0) + 2.0 * m * abs(params.b)) * math.sqrt(sigma) / SQRT_PI
    lam = reset_separation(sigma, m, params)
    if lam > 0:
        # int_a^inf z^{-1} e^{-z^2} dz = E1(a^2) / 2
        c4 = (2.0 * m / SQRT_PI) * 0.5 * float(exp1(lam * lam / (8.0 * sigma)))
    else:
        c4 = math.inf
    return {
        "values": {"i": c1, "ii": c2, "iii": lam, "iv": c4},
        "ok": {"i": c1 <= 2.0, "ii": c2 <= 0.5, "iii": lam > 0.0, "iv": c4 <= 0.5},
    }


@dataclass(frozen=True)
class SigmaWindow:
    m: float
    sigma: float
    Lambda: float
    conditions: dict
    values: dict
    sup_derivative: float

    @property
    def certified(self) -> bool:
        return all(self.conditions.values())

    def shortened(self, sigma: float) -> "SigmaWindow":
        """Same certificate on ``[0, sigma]``; every condition is monotone in the length."""
        if sigma > self.sigma:
            raise ValueError("a window can only be shortened")
        return _make_window(sigma, self.m, self.sup_derivative, None, self)

    def check(self, params: ModelParams) -> "SigmaWindow":
        return _make_window(self.sigma, self.m, self.sup_derivative, params)


def _make_window(sigma, m, sup, params, parent=None):
    if params is None:
        params = parent._params
    c = window_conditions(sigma, m, params)
    w = SigmaWindow(m, sigma, c["values"]["iii"], c["ok"], c["values"], sup)
    object.__setattr__(w, "_params", params)
    return w


def compute_sigma_window(sup_derivative: float, params: ModelParams, sigma_max: float = SIGMA_MAX) -> SigmaWindow:
    """Largest ``sigma`` satisfying all four conditions, found by bisection.

    The conditions are monotone in ``sigma`` (each gets easier as the window
    shrinks), so bisection on ``log sigma`` brackets the boundary.
    """
    if not math.isfinite(sup_derivative) or sup_derivative < 0:
        raise ValueError(f"sup|u_I'| must be finite and nonnegative, got {sup_derivative}")
    m = 1.0 + 2.0 * sup_derivative

    def ok(sig):
        return all(window_conditions(sig, m, params)["ok"].values())

    hi = min(sigma_max, SIGMA_MAX)
    if ok(hi):
        return _make_window(hi, m, sup_derivative, params)
    lo = SIGMA_FLOOR
    if not ok(lo):
        raise WindowError(
            f"no window length above {SIGMA_FLOOR:g} satisfies the conditions "
            f"(m={m:.4g}, b0={params.b0}, b={params.b}, v_R={params.v_R})"
        )
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-13:
            break
    return _make_window(lo, m, sup_derivative, params)


# -- window data and quadrature helpers ---------------------------------------


@dataclass(frozen=True, eq=False)
class VolterraData:
    """Initial density of one window on the physical grid ending at the threshold."""

    nodes: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    @classmethod
    def from_state(cls, state: DensityState) -> "VolterraData":
        if state.grid.x_max != 0.0:
            raise ValueError("window data must end at the threshold")
        return cls(state.grid.nodes, np.asarray(state.values, float), state.nodal_derivative().astype(float))

    @classmethod
    def zero(cls, grid: Grid1D) -> "VolterraData":
        z = np.zeros(grid.n_cells + 1)
        return cls(grid.nodes, z, z)

    @property
    def sup_derivative(self) -> float:
        return float(np.max(np.abs(self.slopes)))

    @property
    def boundary_slope(self) -> float:
        return float(self.slopes[-1])


def _delta_cdf(z: np.ndarray) -> np.ndarray:
    z0, z1 = z[..., :-1], z[..., 1:]
    return np.where(z0 > 0, ndtr(-z0) - ndtr(-z1), ndtr(z1) - ndtr(z0))


def gauss_pl_integral(centers, times, nodes, vals) -> np.ndarray:
    """``int P(xi) G(c, t, xi, 0) dxi`` for the piecewise-linear interpolant ``P``.

    Exact for ``P`` (zero outside ``[nodes[0], nodes[-1]]``): on every cell the
    linear function is integrated against the Gaussian in closed form.
    """
    c = np.atleast_1d(np.asarray(centers, dtype=float))
    t = np.broadcast_to(np.asarray(times, dtype=float), c.shape)
    sd = np.sqrt(2.0 * t)[:, None]
    z = (nodes[None, :] - c[:, None]) / sd
    phi = np.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))
    dP = _delta_cdf(z)
    dphi = phi[:, 1:] - phi[:, :-1]
    slope = np.diff(vals) / np.diff(nodes)
    cell = vals[:-1] * dP + slope * ((c[:, None] - nodes[:-1]) * dP - sd * sd * dphi)
    return cell.sum(axis=1)


def product_weights(n: int, h: float) -> np.ndarray:
    """Lower-triangular weights ``W`` with ``sum_i W[j,i] f_i = int_0^{t_j} f (t_j - tau)^{-1/2} dtau``.

    Exact for ``f`` piecewise linear on the uniform grid ``t_i = i h``.
    """
    d = np.arange(1, n + 1, dtype=float)
    dm = d - 1.0
    p32 = d**1.5 - dm**1.5
    p12 = np.sqrt(d) - np.sqrt(dm)
    wa = math.sqrt(h) * (2.0 / 3.0 * p32 - 2.0 * dm * p12)  # weight on the interval's left node
    wb = math.sqrt(h) * (2.0 * d * p12 - 2.0 / 3.0 * p32)  # weight on the interval's right node
    W = np.zeros((n + 1, n + 1))
    j, i = np.tril_indices(n + 1)
    lag = j - i
    W[j, i] = np.where(lag >= 1, wa[np.maximum(lag, 1) - 1], 0.0) + np.where(i >= 1, wb[np.minimum(lag, n - 1)], 0.0)
    W[0, :] = 0.0
    return W


def _r_quadrature(t: float, n_uniform: int = 64, n_geometric: int = 40, order: int = 6):
    """Gauss-Legendre nodes for ``int_0^sqrt(t) dr`` graded geometrically towards ``r = 0``."""
    R = math.sqrt(t)
    uni = np.linspace(0.0, R, n_uniform + 1)
    geo = uni[1] * 0.5 ** np.arange(1, n_geometric + 1)
    bps = np.concatenate([[0.0], geo[::-1], uni[1:]])
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = bps[:-1, None], bps[1:, None]
    r = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    wr = 0.5 * (b - a) * w[None, :]
    return r.ravel(), wr.ravel()


# -- the fixed-point map ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TTerms:
    J1: np.ndarray
    J2: np.ndarray
    J3: np.ndarray
    s: np.ndarray
    s1: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.J1 + self.J2 + self.J3


class _Operator:
    """Caches the grid-dependent pieces of ``T`` for one window."""

    def __init__(self, data: VolterraData, params: ModelParams, taus: np.ndarray):
        self.data, self.params = data, params
        self.taus = np.asarray(taus, dtype=float)
        h = np.diff(self.taus)
        if self.taus[0] != 0.0 or np.any(h <= 0) or np.ptp(h) > 1e-9 * h.mean():
            raise ValueError("taus must be a uniform grid starting at 0")
        self.W = product_weights(self.taus.size - 1, float(h.mean()))
        self.ainv = alpha_inv(self.taus)
        self.dT = self.taus[:, None] - self.taus[None, :]
        self.lower = self.dT > 0
        self._dTsafe = np.where(self.lower, self.dT, 1.0)

    def terms(self, M: np.ndarray) -> TTerms:
        p = self.params
        fb = FreeBoundary.from_samples(p, self.taus, M)
        s = fb.s
        s1 = s + p.v_R * self.ainv
        J1 = np.empty_like(M)
        J1[0] = -self.data.boundary_slope
        J1[1:] = -2.0 * gauss_pl_integral(s[1:], self.taus[1:], self.data.nodes, self.data.slopes)
        d2 = s[:, None] - s[None, :]
        k2 = np.where(
            self.lower, -d2 / (2.0 * self._dTsafe) * INV_SQRT_4PI * np.exp(-d2 * d2 / (4.0 * self._dTsafe)), 0.0
        )
        s_dot = -p.b0 / self.ainv - p.b * M * self.ainv
        k2[np.diag_indices_from(k2)] = -s_dot / 2.0 * INV_SQRT_4PI
        d3 = s[:, None] - s1[None, :]
        k3 = np.where(
            self.lower, -d3 / (2.0 * self._dTsafe) * INV_SQRT_4PI * np.exp(-d3 * d3 / (4.0 * self._dTsafe)), 0.0
        )
        J2 = 2.0 * (self.W * k2) @ M
        J3 = -2.0 * (self.W * k3) @ M
        return TTerms(J1, J2, J3, s, s1)


def apply_T(M, data: VolterraData, params: ModelParams, window: SigmaWindow, taus, _op=None) -> np.ndarray:
    """One application of the fixed-point map on the sample grid ``taus``."""
    M = np.asarray(M, dtype=float)
    if np.max(np.abs(M)) > window.m * (1 + 1e-12):
        raise WindowError(f"iterate leaves the ball: |M|={np.max(np.abs(M)):.4g} > m={window.m:.4g}")
    op = _op if _op is not None else _Operator(data, params, taus)
    TM = op.terms(M).total
    if np.max(np.abs(TM)) > window.m * (1 + 1e-12):
        raise WindowError(f"T(M) leaves the ball: |T(M)|={np.max(np.abs(TM)):.4g} > m={window.m:.4g}")
    return TM


@dataclass(frozen=True, eq=False)
class MSolution:
    window: SigmaWindow
    taus: np.ndarray
    samples: np.ndarray
    picard_iterations: int
    contraction_estimates: tuple
    residual: float
    increments: tuple
    boundary: FreeBoundary = field(repr=False)

    @property
    def s(self) -> np.ndarray:
        return self.boundary.s

    @property
    def s1(self) -> np.ndarray:
        return self.boundary.s1


def solve_M_picard(
    data: VolterraData,
    params: ModelParams,
    window: SigmaWindow,
    taus: Optional[np.ndarray] = None,
    tol: float = 1e-10,
    max_iter: int = 25,
    steps: int = 200,
) -> MSolution:
    """Picard iteration ``M_{k+1} = T(M_k)`` from the constant ``M_0 = -u_I'(0^-)``.

    Raises :class:`PicardFailure` if the increments do not fall below ``tol``
    within ``max_iter`` iterations, or if a measured contraction ratio exceeds
    0.6 while the increments are still above round-off.
    """
    if not window.certified:
        raise WindowError("window certificate does not hold")
    if taus is None:
        taus = np.linspace(0.0, window.sigma, steps + 1)
    taus = np.asarray(taus, dtype=float)
    if taus[-1] > window.sigma * (1 + 1e-12):
        raise WindowError("sample grid extends past the certified window")
    op = _Operator(data, params, taus)
    M = np.full(taus.size, max(-data.boundary_slope, 0.0))
    incs, ratios = [], []
    noise = 1e-13 * max(1.0, window.m)
    for k in range(1, max_iter + 1):
        TM = apply_T(M, data, params, window, taus, _op=op)
        inc = float(np.max(np.abs(TM - M)))
        incs.append(inc)
        if k > 1 and incs[-2] > noise:
            ratios.append(inc / incs[-2])
            if ratios[-1] > CONTRACTION_LIMIT and inc > noise:
                raise PicardFailure(
                    f"contraction ratio {ratios[-1]:.3f} exceeds {CONTRACTION_LIMIT} at iteration {k}", ratios
                )
        M = TM
        if inc <= tol:
            break
    else:
        raise PicardFailure(f"no convergence in {max_iter} iterations (last increment {incs[-1]:.3e})", ratios)
    residual = float(np.max(np.abs(op.terms(M).total - M)))
    fb = FreeBoundary.from_samples(params, taus, M)
    return MSolution(window, taus, M, k, tuple(ratios), residual, tuple(incs), fb)


# -- Duhamel recovery ---------------------------------------------------------


def _curve_samples(sol: MSolution, j: int, r: np.ndarray, params: ModelParams):
    taus = sol.taus[: j + 1]
    tr = taus[-1] - r * r
    Mr = np.interp(tr, taus, sol.samples[: j + 1])
    sr = np.interp(tr, taus, sol.s[: j + 1])
    s1r = sr + params.v_R * alpha_inv(tr)
    return Mr, sr, s1r


def duhamel_u(sol: MSolution, data: VolterraData, params: ModelParams, x, j: Optional[int] = None) -> np.ndarray:
    """``u = I1 - I2 + I3`` at points ``x`` and sample time ``taus[j]`` (default: window end).

    The time integrals use ``tau = t - r^2``, which removes the ``(t-tau)^{-1/2}``
    factor; the remaining boundary layer near ``r = 0`` is resolved by geometric panels.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    j = sol.taus.size - 1 if j is None else int(j)
    t = float(sol.taus[j])
    if t == 0.0:
        return np.interp(x, data.nodes, data.values, left=0.0, right=0.0)
    I1 = gauss_pl_integral(x, t, data.nodes, data.values)
    r, w = _r_quadrature(t)
    Mr, sr, s1r = _curve_samples(sol, j, r, params)
    r2 = 4.0 * r * r
    I2 = (np.exp(-((x[:, None] - sr) ** 2) / r2) @ (w * Mr)) / SQRT_PI
    I3 = (np.exp(-((x[:, None] - s1r) ** 2) / r2) @ (w * Mr)) / SQRT_PI
    return I1 - I2 + I3


def duhamel_ux(sol: MSolution, data: VolterraData, params: ModelParams, x, j: Optional[int] = None) -> np.ndarray:
    """Spatial derivative of :func:`duhamel_u`, differentiating under the integrals."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    j = sol.taus.size - 1 if j is None else int(j)
    t = float(sol.taus[j])
    if t == 0.0:
        return np.interp(x, data.nodes, data.slopes, left=0.0, right=0.0)
    I1 = gauss_pl_integral(x, t, data.nodes, data.slopes)
    r, w = _r_quadrature(t)
    Mr, sr, s1r = _curve_samples(sol, j, r, params)
    r2 = 4.0 * r * r
    d2 = x[:, None] - sr
    d3 = x[:, None] - s1r
    I2 = ((-d2 / (2.0 * r * r)) * np.exp(-d2 * d2 / r2)) @ (w * Mr) / SQRT_PI
    I3 = ((-d3 / (2.0 * r * r)) * np.exp(-d3 * d3 / r2)) @ (w * Mr) / SQRT_PI
    return I1 - I2 + I3


@dataclass(frozen=True)
class RecoveryDiagnostics:
    boundary_value: float
    min_value: float
    mass: float


def recover_with_diagnostics(sol: MSolution, data: VolterraData, params: ModelParams):
    tau = float(sol.taus[-1])
    s_end = float(sol.s[-1])
    a_inv = math.sqrt(2.0 * tau + 1.0)
    n = data.nodes.size - 1
    grid = Grid1D(s_end + data.nodes[0] * a_inv, s_end, n)
    x = s_end + data.nodes * a_inv
    u = duhamel_u(sol, data, params, x)
    diag = RecoveryDiagnostics(
        boundary_value=float(u[-1]),
        min_value=float(u.min()),
        mass=float(grid.spacing * (u.sum() - 0.5 * (u[0] + u[-1]))),
    )
    vals = np.clip(u, 0.0, None)
    vals[-1] = 0.0
    return DensityState(Frame.STEFAN, tau, grid, vals), diag


def duhamel_recover_u(sol: MSolution, data: VolterraData, params: ModelParams) -> DensityState:
    """Stefan-frame density at the window end on the image of the physical nodes."""
    return recover_with_diagnostics(sol, data, params)[0]


def boundary_derivative(taus, rho, curve, t_index: int, side: str = "left") -> float:
    """One-sided limit of ``d/dx int_0^t rho(tau) G(x, t, c(tau), tau) dtau`` as ``x -> c(t)``.

    Equals ``+-rho(t)/2 + int_0^t rho G_x(c(t), t, c(tau), tau) dtau`` (``+`` from the
    left). The integral uses product weights; its regular factor
    ``G_x (t-tau)^{1/2}`` tends to ``-c'(t) / (2 sqrt(4 pi))`` on the diagonal.
    """
    taus = np.asarray(taus, dtype=float)
    rho = np.asarray(rho, dtype=float)
    curve = np.asarray(curve, dtype=float)
    j = int(t_index)
    sign = {"left": 1.0, "right": -1.0}[side]
    if j == 0:
        return sign * 0.5 * float(rho[0])
    h = taus[1] - taus[0]
    W = product_weights(j, h)[j]
    d = curve[j] - curve[: j + 1]
    dt = taus[j] - taus[: j + 1]
    dts = np.where(dt > 0, dt, 1.0)
    k = np.where(dt > 0, -d / (2.0 * dts) * INV_SQRT_4PI * np.exp(-d * d / (4.0 * dts)), 0.0)
    if j >= 2:
        # difference form: exactly zero on a constant curve
        c_dot = (3.0 * (curve[j] - curve[j - 1]) - (curve[j - 1] - curve[j - 2])) / (2.0 * h)
    else:
        c_dot = (curve[j] - curve[j - 1]) / h
    k[j] = -c_dot / 2.0 * INV_SQRT_4PI
    return sign * 0.5 * float(rho[j]) + float(W @ (rho[: j + 1] * k))


# -- chaining -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WindowRecord:
    t0: float
    window: SigmaWindow
    solution: MSolution
    end_state: DensityState
    end_physical: DensityState
    diagnostics: RecoveryDiagnostics
    data: VolterraData = field(repr=False)

    @property
    def physical_length(self) -> float:
        return float(t_of_tau(self.solution.taus[-1]))


@dataclass(frozen=True, eq=False)
class ChainResult:
    windows: list
    status: str
    final_state: DensityState

    def physical_rates(self):
        """``N(t) = M / alpha^2`` from every window, as (t, N) arrays."""
        ts, ns = [], []
        for k, w in enumerate(self.windows):
            taus = w.solution.taus
            sl = slice(0 if k == 0 else 1, None)
            ts.append(w.t0 + t_of_tau(taus[sl]))
            ns.append(w.solution.samples[sl] * (2.0 * taus[sl] + 1.0))
        if not ts:
            return np.zeros(0), np.zeros(0)
        return np.concatenate(ts), np.concatenate(ns)


def solve_chain(
    initial: DensityState,
    params: ModelParams,
    horizon: float,
    tol: float = 1e-10,
    max_iter: int = 25,
    steps_per_window: int = 200,
    max_windows: Optional[int] = None,
    rate_cap: float = math.inf,
) -> ChainResult:
    """Cover ``[initial.time, horizon]`` with certified windows.

    Each window restarts the change of variables at its start time, so the
    window data is the physical density there and ``m`` is recomputed from its
    slope.
    """
    state = initial
    grid = initial.grid
    windows = []
    status = "completed"
    tol_t = 1e-12 * max(1.0, abs(horizon))
    while state.time < horizon - tol_t:
        if max_windows is not None and len(windows) >= max_windows:
            status = "window_limit"
            break
        data = VolterraData.from_state(state)
        window = compute_sigma_window(data.sup_derivative, params)
        tau_left = float(tau_of_t(horizon - state.time))
        if tau_left < window.sigma:
            window = window.shortened(tau_left)
        sol = solve_M_picard(data, params, window, tol=tol, max_iter=max_iter, steps=steps_per_window)
        u_end, diag = recover_with_diagnostics(sol, data, params)
        phys = from_stefan(u_end, sol.boundary)
        t_end = state.time + phys.time
        if abs(t_end - horizon) < 1e-9 * max(1.0, horizon):
            t_end = horizon
        nxt = DensityState(Frame.PHYSICAL, t_end, grid, phys.values)
        windows.append(WindowRecord(state.time, window, sol, u_end, nxt, diag, data))
        state = nxt
        if np.max(sol.samples * (2.0 * sol.taus + 1.0)) > rate_cap:
            status = "rate_exceeded_threshold"
            break
    return ChainResult(windows, status, state)


def reset_jump(sol: MSolution, data: VolterraData, params: ModelParams, j: int, h: float = 1e-4) -> float:
    """``u_x(s1^-) - u_x(s1^+)`` at sample ``j`` from one-sided quadratic extrapolation.

    Each side is sampled at distances ``h, 2h, 3h``; the smooth part of ``u_x``
    would otherwise leave an ``O(h u_xx)`` bias that swamps small rates.
    """
    c = float(sol.s1[j])
    k = np.array([1.0, 2.0, 3.0])
    left = duhamel_ux(sol, data, params, c - k * h, j)
    right = duhamel_ux(sol, data, params, c + k * h, j)
    w = np.array([3.0, -3.0, 1.0])
    return float(w @ left - w @ right)
