"""Parameters, grids, initial data and the physical <-> dimensionless rescaling."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

# slack allowed on stored densities before a value counts as negative
NEG_SLACK = 1e-14
# tolerance used when validating initial profiles
PROFILE_TOL = 1e-12


class Frame(str, enum.Enum):
    PHYSICAL = "physical"
    STEFAN = "stefan"


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional parameters of the integrate-and-fire population.

    Attributes
    ----------
    cap_B : float
        Net connectivity strength.
    nu_ext : float
        External firing rate.
    a0 : float
        Diffusion amplitude, strictly positive.
    v_th, v_L, v_R_phys : float
        Threshold, leak and reset voltages with ``v_L < v_R_phys < v_th``.
    """

    cap_B: float
    nu_ext: float
    a0: float
    v_th: float
    v_L: float
    v_R_phys: float

    def __post_init__(self) -> None:
        if not self.a0 > 0:
            raise ValueError(f"a0 must be positive, got {self.a0}")
        if not (self.v_L < self.v_R_phys < self.v_th):
            raise ValueError(
                "voltages must satisfy v_L < v_R_phys < v_th, got "
                f"v_L={self.v_L}, v_R_phys={self.v_R_phys}, v_th={self.v_th}"
            )


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless drift parameters ``mu = b0 + b N`` and the reset point."""

    b0: float
    b: float
    v_R: float
    physical: Optional[PhysicalParams] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        for name in ("b0", "b", "v_R"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.v_R < 0:
            raise ValueError(f"v_R must satisfy v_R < 0, got {self.v_R}")

    def mu(self, rate: float) -> float:
        return self.b0 + self.b * rate

    @property
    def network(self) -> str:
        if self.b > 0:
            return "excitatory"
        if self.b < 0:
            return "inhibitory"
        return "linear"


def rescale(phys: PhysicalParams) -> ModelParams:
    """Map physical parameters to the dimensionless form (threshold at 0)."""
    if not phys.a0 > 0:
        raise ValueError(f"a0 must be positive, got {phys.a0}")
    b0 = (phys.cap_B * phys.nu_ext - phys.v_th) / phys.a0
    b = phys.cap_B / phys.a0**3
    v_R = (phys.v_R_phys - phys.v_th) / phys.a0
    return ModelParams(b0=b0, b=b, v_R=v_R, physical=phys)


def unrescale(
    params: ModelParams, a0: float, v_th: float, v_L: float, nu_ext: Optional[float] = None
) -> PhysicalParams:
    """Inverse of :func:`rescale` given the scale ``a0`` and the voltages ``v_th, v_L``.

    With ``B = 0`` the external rate is not identifiable; it must then be
    supplied and consistent with ``b0``.
    """
    if not a0 > 0:
        raise ValueError(f"a0 must be positive, got {a0}")
    cap_B = params.b * a0**3
    drive = params.b0 * a0 + v_th
    if cap_B != 0.0:
        nu = drive / cap_B
    else:
        if not math.isclose(drive, 0.0, abs_tol=1e-12 * max(1.0, abs(v_th))):
            raise ValueError("B = 0 requires b0 * a0 + v_th = 0")
        nu = 0.0 if nu_ext is None else nu_ext
    return PhysicalParams(
        cap_B=cap_B, nu_ext=nu, a0=a0, v_th=v_th, v_L=v_L, v_R_phys=params.v_R * a0 + v_th
    )


@dataclass(frozen=True)
class Grid1D:
    """Uniform node grid on ``[x_min, x_max]`` with ``n_cells + 1`` nodes."""

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self) -> None:
        if not self.x_min < self.x_max:
            raise ValueError(f"grid needs x_min < x_max, got {self.x_min}, {self.x_max}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError(f"n_cells must be an integer >= 2, got {self.n_cells}")

    @classmethod
    def to_threshold(cls, x_min: float, n_cells: int) -> "Grid1D":
        return cls(float(x_min), 0.0, int(n_cells))

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        x = self.x_min + self.spacing * np.arange(self.n_cells + 1)
        x[-1] = self.x_max
        return x

    def refined(self, factor: int = 2) -> "Grid1D":
        return Grid1D(self.x_min, self.x_max, self.n_cells * factor)


def trapezoid_mass(values: np.ndarray, spacing: float) -> float:
    return float(spacing * (values.sum() - 0.5 * (values[0] + values[-1])))


@dataclass(frozen=True, eq=False)
class DensityState:
    """Grid samples of a density in one of the two frames.

    ``derivative`` optionally carries exact nodal derivatives (set for
    closed-form initial data); ``profile`` keeps the generating profile so
    refinement studies can resample it.
    """

    frame: Frame
    time: float
    grid: Grid1D
    values: np.ndarray
    derivative: Optional[np.ndarray] = None
    profile: Optional[Callable] = None
    mass: float = field(init=False)

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_cells + 1,):
            raise ValueError(
                f"values has shape {vals.shape}, grid expects ({self.grid.n_cells + 1},)"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("density values must be finite")
        if vals.min() < -NEG_SLACK:
            raise ValueError(f"density is negative beyond slack: min={vals.min():.3e}")
        if vals[-1] != 0.0:
            raise ValueError("density must vanish at the right endpoint")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.derivative is not None:
            der = np.array(self.derivative, dtype=float)
            der.setflags(write=False)
            object.__setattr__(self, "derivative", der)
        object.__setattr__(self, "mass", trapezoid_mass(vals, self.grid.spacing))

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def sup_derivative(self) -> float:
        """``sup |d values/dx|``; exact when nodal derivatives are attached."""
        if self.derivative is not None:
            return float(np.max(np.abs(self.derivative)))
        return float(np.max(np.abs(np.gradient(self.values, self.grid.spacing, edge_order=2))))

    def nodal_derivative(self) -> np.ndarray:
        if self.derivative is not None:
            return np.asarray(self.derivative)
        return np.gradient(self.values, self.grid.spacing, edge_order=2)

    def replace(self, **changes) -> "DensityState":
        kw = dict(
            frame=self.frame,
            time=self.time,
            grid=self.grid,
            values=self.values,
            derivative=self.derivative,
            profile=self.profile,
        )
        kw.update(changes)
        return DensityState(**kw)


def mass(state: DensityState) -> float:
    return trapezoid_mass(np.asarray(state.values), state.grid.spacing)


@dataclass(frozen=True, eq=False)
class FiringRateSeries:
    frame: Frame
    times: np.ndarray
    rates: np.ndarray

    def __post_init__(self) -> None:
        t = np.array(self.times, dtype=float)
        r = np.array(self.rates, dtype=float)
        if t.shape != r.shape or t.ndim != 1:
            raise ValueError("times and rates must be 1-d arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if r.size and r.min() < 0:
            raise ValueError(f"firing rate must be nonnegative, min={r.min():.3e}")
        t.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "rates", r)

    def __len__(self) -> int:
        return int(self.times.size)

    def at(self, t) -> np.ndarray:
        return np.interp(t, self.times, self.rates)


# -- initial profiles --------------------------------------------------------


def _edge_factor(v, ell):
    # 1 - exp(v/ell) vanishes at the threshold and tends to 1 away from it
    e = np.exp(np.minimum(v, 0.0) / ell)
    return 1.0 - e, -e / ell


@dataclass(frozen=True)
class Profile:
    """Closed-form initial profile, unnormalized.

    Kinds
    -----
    gaussian
        ``exp(-(v-c)^2 / 2w^2)`` times the threshold cutoff ``1 - exp(v/l)``.
    hermite
        ``z^2 exp(-z^2/2)``, ``z = (v-c)/w``, times the same cutoff.
    near_threshold
        ``-v exp(-v^2 / 2w^2)``; mass concentrated within a few ``w`` of 0.
    ramp
        ``-v exp(v/w)``.

    The cutoff length ``l`` defaults to ``w / 4``.
    """

    kind: str = "gaussian"
    center: float = -2.0
    width: float = 0.5
    edge: Optional[float] = None

    KINDS = ("gaussian", "hermite", "near_threshold", "ramp")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}; expected one of {self.KINDS}")
        if not self.width > 0:
            raise ValueError(f"profile width must be positive, got {self.width}")

    @property
    def _ell(self) -> float:
        return self.edge if self.edge is not None else self.width / 4.0

    def __call__(self, v):
        return self.value_and_derivative(v)[0]

    def derivative(self, v):
        return self.value_and_derivative(v)[1]

    def value_and_derivative(self, v):
        v = np.asarray(v, dtype=float)
        w = self.width
        if self.kind == "near_threshold":
            g = np.exp(-0.5 * (v / w) ** 2)
            return -v * g, (v * v / (w * w) - 1.0) * g
        if self.kind == "ramp":
            e = np.exp(v / w)
            return -v * e, -(1.0 + v / w) * e
        z = (v - self.center) / w
        g = np.exp(-0.5 * z * z)
        if self.kind == "gaussian":
            f, df = g, -z / w * g
        else:
            f, df = z * z * g, z * (2.0 - z * z) / w * g
        c, dc = _edge_factor(v, self._ell)
        return f * c, df * c + f * dc


def make_initial_density(profile, grid: Grid1D, time: float = 0.0) -> DensityState:
    """Sample ``profile`` on ``grid`` and normalize to unit trapezoid mass.

    ``profile`` is a callable of ``v``; if it has a ``derivative`` method the
    exact nodal derivative is stored for the window computations downstream.
    """
    v = grid.nodes
    raw = np.asarray(profile(v), dtype=float)
    if raw.shape != v.shape or not np.all(np.isfinite(raw)):
        raise ValueError("profile must return finite values on the grid")
    scale = float(np.max(np.abs(raw)))
    if scale == 0.0:
        raise ValueError("profile has zero mass")
    if raw.min() < -PROFILE_TOL * scale:
        raise ValueError(f"profile is negative beyond tolerance: min={raw.min():.3e}")
    if abs(raw[-1]) > PROFILE_TOL * scale:
        raise ValueError(f"profile must vanish at the threshold, p(0)={raw[-1]:.3e}")
    if abs(raw[0]) > PROFILE_TOL * scale:
        logger.warning("profile has not decayed at x_min=%g (p=%.3e)", grid.x_min, raw[0])
    vals = np.clip(raw, 0.0, None)
    vals[0] = 0.0
    vals[-1] = 0.0
    total = trapezoid_mass(vals, grid.spacing)
    if not total > 0:
        raise ValueError("profile has zero mass")
    der = None
    if hasattr(profile, "derivative"):
        der = np.asarray(profile.derivative(v), dtype=float) / total
    return DensityState(
        frame=Frame.PHYSICAL,
        time=float(time),
        grid=grid,
        values=vals / total,
        derivative=der,
        profile=profile,
    )
