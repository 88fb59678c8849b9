"""Flat ``key = value`` run configuration with dotted section keys."""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from .fp_solver import FPSchemeConfig
from .model import Grid1D, ModelParams, PhysicalParams, Profile, rescale


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _floats(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


# key -> (default, parser). A default of None marks a key without default.
_SPEC = {
    "b0": (None, float),
    "b": (None, float),
    "v_R": (None, float),
    "grid.x_min": (-8.0, float),
    "grid.n_cells": (800, int),
    "init.profile": ("gaussian", str),
    "init.center": (-2.0, float),
    "init.width": (0.5, float),
    "init.edge": (None, float),
    "scheme.dt": (1e-5, float),
    "scheme.drift_treatment": ("semi-implicit", str),
    "scheme.flux_stencil_order": (2, int),
    "scheme.delta_deposit": ("linear-split", str),
    "scheme.drift_reconstruction": ("muscl", str),
    "scheme.rate_feedback": ("stencil", str),
    "scheme.diffusion_cfl": (0.5, float),
    "scheme.drift_cfl": (0.5, float),
    "run.horizon": (2.0, float),
    "run.rate_cap": (1e3, float),
    "run.record_every": (10, int),
    "volterra.tol": (1e-10, float),
    "volterra.max_iter": (25, int),
    "volterra.steps_per_window": (200, int),
    "volterra.windows": (0, int),
    "volterra.horizon": (0.5, float),
    "blowup.b_values": ((0.5, 1.0, 2.0, 4.0), _floats),
    "blowup.widths": ((0.05, 0.1, 0.2), _floats),
    "blowup.horizon": (1.0, float),
    "blowup.refinements": (2, int),
    "blowup.cauchy_tol": (0.1, float),
    "blowup.x_min": (-4.0, float),
    "blowup.n_cells": (400, int),
    "blowup.dt": (1e-5, float),
    "blowup.shift": (3.0, float),
    "spectrum.n_max": (4, int),
    "spectrum.v_min": (-10.0, float),
    "spectrum.match_tol": (1e-6, float),
    "physical.B": (None, float),
    "physical.nu_ext": (None, float),
    "physical.a0": (None, float),
    "physical.v_th": (None, float),
    "physical.v_L": (None, float),
    "physical.v_R": (None, float),
}
KNOWN_KEYS = tuple(_SPEC)
_PHYSICAL = [k for k in _SPEC if k.startswith("physical.")]


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``values`` holds every key after default fill."""

    values: dict
    params: ModelParams
    grid: Grid1D
    profile: Profile
    scheme: FPSchemeConfig
    physical: Optional[PhysicalParams] = None
    source: Optional[str] = None

    def __getitem__(self, key: str):
        return self.values[key]

    def snapshot(self) -> dict:
        out = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.values.items()}
        out["derived.b0"] = self.params.b0
        out["derived.b"] = self.params.b
        out["derived.v_R"] = self.params.v_R
        if self.physical is not None:
            out["derived.physical"] = asdict(self.physical)
        return out


def read_pairs(text: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), strict=True)
    cp.optionxform = str  # keys are case-sensitive (v_R, physical.B)
    try:
        cp.read_string("[root]\n" + text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(exc.option, "duplicate key") from None
    except configparser.Error as exc:
        raise ConfigError("<file>", f"malformed config: {exc}") from None
    return dict(cp["root"])


def parse_config(path=None, text: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Read, default-fill and validate a configuration file (or ``text``)."""
    if text is None:
        if path is None:
            raise ConfigError("<file>", "no config given")
        p = Path(path)
        if not p.is_file():
            raise ConfigError("<file>", f"config file not found: {path}")
        text = p.read_text()
    raw = read_pairs(text)
    raw.update({k: str(v) for k, v in (overrides or {}).items()})
    for key in raw:
        if key not in _SPEC:
            raise ConfigError(key, "unknown key")
    values = {}
    for key, (default, conv) in _SPEC.items():
        if key in raw:
            try:
                val = conv(raw[key])
            except ValueError:
                raise ConfigError(key, f"cannot parse {raw[key]!r}") from None
            if isinstance(val, float) and not math.isfinite(val):
                raise ConfigError(key, "must be finite")
            values[key] = val
        else:
            values[key] = default
    return _build(values, path if path is None else str(path), set(raw))


def _build(values: dict, source, given: set) -> RunConfig:
    phys_given = [k for k in _PHYSICAL if k in given]
    direct_given = [k for k in ("b0", "b", "v_R") if k in given]
    physical = None
    if phys_given:
        if direct_given:
            raise ConfigError(direct_given[0], "give either b0/b/v_R or a physical.* block, not both")
        missing = [k for k in _PHYSICAL if k not in given]
        if missing:
            raise ConfigError(missing[0], "required when a physical.* block is present")
        try:
            physical = PhysicalParams(
                cap_B=values["physical.B"], nu_ext=values["physical.nu_ext"], a0=values["physical.a0"],
                v_th=values["physical.v_th"], v_L=values["physical.v_L"], v_R_phys=values["physical.v_R"],
            )
        except ValueError as exc:
            key = "physical.a0" if "a0" in str(exc) else "physical.v_R"
            raise ConfigError(key, str(exc)) from None
        params = rescale(physical)
        values["b0"], values["b"], values["v_R"] = params.b0, params.b, params.v_R
    else:
        for key in ("b0", "b", "v_R"):
            if key not in given:
                raise ConfigError(key, "required")
        if not values["v_R"] < 0:
            raise ConfigError("v_R", f"must satisfy v_R < 0 (reset below threshold), got {values['v_R']}")
        params = ModelParams(values["b0"], values["b"], values["v_R"])
    try:
        grid = Grid1D.to_threshold(values["grid.x_min"], values["grid.n_cells"])
    except ValueError as exc:
        raise ConfigError("grid.x_min" if "x_min" in str(exc) else "grid.n_cells", str(exc)) from None
    if not grid.x_min < params.v_R:
        raise ConfigError("grid.x_min", f"must lie left of v_R={params.v_R}")
    try:
        profile = Profile(values["init.profile"], values["init.center"], values["init.width"], values["init.edge"])
    except ValueError as exc:
        raise ConfigError("init.profile" if "kind" in str(exc) else "init.width", str(exc)) from None
    try:
        scheme = FPSchemeConfig(
            dt=values["scheme.dt"],
            drift_treatment=values["scheme.drift_treatment"],
            flux_stencil_order=values["scheme.flux_stencil_order"],
            delta_deposit=values["scheme.delta_deposit"],
            drift_reconstruction=values["scheme.drift_reconstruction"],
            rate_feedback=values["scheme.rate_feedback"],
            diffusion_cfl=values["scheme.diffusion_cfl"],
            drift_cfl=values["scheme.drift_cfl"],
        )
        scheme.check_grid(grid.spacing)
    except ValueError as exc:
        raise ConfigError(_scheme_key(str(exc)), str(exc)) from None
    for key in ("run.horizon", "run.rate_cap", "volterra.tol", "volterra.horizon", "blowup.horizon", "blowup.dt"):
        if not values[key] > 0:
            raise ConfigError(key, "must be positive")
    for key in ("run.record_every", "volterra.max_iter", "volterra.steps_per_window", "spectrum.n_max",
                "blowup.refinements", "blowup.n_cells"):
        if values[key] < 1:
            raise ConfigError(key, "must be >= 1")
    if values["volterra.windows"] < 0:
        raise ConfigError("volterra.windows", "must be >= 0 (0 = until the horizon)")
    return RunConfig(values, params, grid, profile, scheme, physical, source)


def _scheme_key(msg: str) -> str:
    for name in ("drift_treatment", "flux_stencil_order", "delta_deposit", "drift_reconstruction", "rate_feedback"):
        if name in msg:
            return f"scheme.{name}"
    if "CFL" in msg:
        return "scheme.drift_cfl"
    return "scheme.dt"
