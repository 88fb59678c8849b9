"""Command-line entry point: ``nnlif <subcommand> --config FILE ...``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import blowup, fp_solver, spectrum, stefan_map, volterra
from .config import ConfigError, parse_config
from .io import RunManifest, emit_csv, emit_json
from .model import make_initial_density

logger = logging.getLogger("nnlif")


def _initial(cfg):
    return make_initial_density(cfg.profile, cfg.grid)


def _finish(manifest: RunManifest, path) -> Path:
    manifest.add(path)
    return manifest.write(path)


def cmd_simulate(args, cfg) -> int:
    horizon = args.horizon if args.horizon is not None else cfg["run.horizon"]
    cap = args.rate_cap if args.rate_cap is not None else cfg["run.rate_cap"]
    prefix = Path(args.out_prefix)
    man = RunManifest("simulate", cfg.snapshot())
    init = _initial(cfg)
    res = fp_solver.run(init, cfg.params, cfg.scheme, horizon, rate_cap=cap, record_every=cfg["run.record_every"])
    t, n = res.rate_series.times, res.rate_series.rates
    man.add(emit_csv(f"{prefix}_rate.csv", ["t", "N"], [t, n], "rate"))
    man.add(emit_csv(f"{prefix}_mass.csv", ["t", "mass"], list(res.mass_series), "mass"))
    fs = res.final_state
    man.add(emit_csv(f"{prefix}_final_density.csv", ["v", "p"], [fs.grid.nodes, fs.values], "final_density"))
    man.results = {
        "status": res.status,
        "final_time": fs.time,
        "max_mass_deviation": fp_solver.conservation_report(res),
        "rate_peak": res.rate_peak,
        "t_exceeded": res.t_exceeded,
        "message": res.message,
    }
    _finish(man, f"{prefix}_manifest.json")
    if res.status == "unstable":
        print(f"simulate: scheme unstable: {res.message}", file=sys.stderr)
        return 1
    return 0


def _chain(cfg, horizon, tol=None, windows=None):
    init = _initial(cfg)
    return init, volterra.solve_chain(
        init,
        cfg.params,
        horizon,
        tol=tol if tol is not None else cfg["volterra.tol"],
        max_iter=cfg["volterra.max_iter"],
        steps_per_window=cfg["volterra.steps_per_window"],
        max_windows=windows or None,
    )


def cmd_transform_check(args, cfg) -> int:
    horizon = args.horizon if args.horizon is not None else cfg["volterra.horizon"]
    out = Path(args.out)
    man = RunManifest("transform-check", cfg.snapshot())
    init, chain = _chain(cfg, horizon)
    cps = [w.end_physical.time for w in chain.windows]
    fp = fp_solver.run(init, cfg.params, cfg.scheme, chain.final_state.time, rate_cap=math.inf, checkpoints=cps)
    rep = stefan_map.equivalence_check(fp, chain)
    man.add(emit_json(rep.as_dict(), out))
    man.results = dict(rep.as_dict(), n_windows=rep.n_times, horizon=chain.final_state.time)
    _finish(man, out.with_name(out.stem + "_manifest.json"))
    return 0


def window_report(chain) -> list:
    rows = []
    for k, w in enumerate(chain.windows):
        win = w.window
        rows.append({
            "window": k,
            "t0": w.t0,
            "sigma": win.sigma,
            "m": win.m,
            "Lambda": win.Lambda,
            "conditions": dict(win.conditions),
            "condition_values": dict(win.values),
            "picard_iterations": w.solution.picard_iterations,
            "contraction_ratios": list(w.solution.contraction_estimates),
            "residual": w.solution.residual,
            "boundary_value": w.diagnostics.boundary_value,
            "recovered_mass": w.diagnostics.mass,
        })
    return rows


def cmd_firing_rate(args, cfg) -> int:
    out = Path(args.out)
    man = RunManifest("firing-rate", cfg.snapshot())
    windows = args.windows if args.windows is not None else cfg["volterra.windows"]
    horizon = args.horizon if args.horizon is not None else cfg["volterra.horizon"]
    _, chain = _chain(cfg, horizon, tol=args.tol, windows=windows)
    win_idx, taus, M, t = [], [], [], []
    for k, w in enumerate(chain.windows):
        s = w.solution
        win_idx.append(np.full(s.taus.size, k))
        taus.append(s.taus)
        M.append(s.samples)
        t.append(w.t0 + stefan_map.t_of_tau(s.taus))
    cat = (lambda xs: np.concatenate(xs)) if chain.windows else (lambda xs: np.zeros(0))
    man.add(emit_csv(out / "M.csv", ["window", "tau", "M", "t"], [cat(win_idx), cat(taus), cat(M), cat(t)], "M"))
    rep = {"status": chain.status, "windows": window_report(chain)}
    man.add(emit_json(rep, out / "window_report.json"))
    man.results = {
        "status": chain.status,
        "n_windows": len(chain.windows),
        "final_time": chain.final_state.time,
        "max_contraction_ratio": max((max(w.solution.contraction_estimates, default=0.0) for w in chain.windows), default=0.0),
    }
    _finish(man, out / "manifest.json")
    return 0


def cmd_blowup_scan(args, cfg) -> int:
    out = Path(args.out)
    man = RunManifest("blowup-scan", cfg.snapshot())
    b_values = cfg["blowup.b_values"] if args.b_values is None else _float_list(args.b_values)
    widths = cfg["blowup.widths"] if args.widths is None else _float_list(args.widths)
    cap = args.rate_cap if args.rate_cap is not None else cfg["run.rate_cap"]
    det = blowup.DetectorConfig(
        rate_cap=cap,
        refinements=cfg["blowup.refinements"],
        cauchy_tol=cfg["blowup.cauchy_tol"],
        scheme=replace(cfg.scheme, dt=cfg["blowup.dt"], rate_feedback="outflux"),
        track_windows=False,
    )
    settings = blowup.ScanSettings(
        b0=cfg.params.b0, v_R=cfg.params.v_R, x_min=cfg["blowup.x_min"], n_cells=cfg["blowup.n_cells"],
        horizon=cfg["blowup.horizon"], shift=cfg["blowup.shift"], detector=det,
    )
    res = blowup.blowup_scan(b_values, widths, settings)
    rows = res.rows
    tstar = ["" if not math.isfinite(r.t_star) else format(r.t_star, ".17g") for r in rows]
    man.add(emit_csv(
        out / "scan.csv", ["b", "width", "regime", "t_star", "rate_peak"],
        [[r.b for r in rows], [r.width for r in rows], [r.regime for r in rows], tstar, [r.rate_peak for r in rows]],
        "scan",
    ))
    for i, r in enumerate(rows):
        man.add(emit_json({
            "b": r.b, "width": r.width, "regime": r.regime, "t_star": r.t_star, "rate_peak": r.rate_peak,
            "refinement_history": [{"dt": h[0], "dv": h[1], "t_star": h[2]} for h in r.refinement_history],
            "message": r.message,
        }, out / "rows" / f"row_{i:03d}.json"))
    man.results = {
        "n_rows": len(rows),
        "n_blowup": sum(r.regime == blowup.BLOWUP for r in rows),
        "trend_ok": res.trend_ok,
        "trend_violations": res.trend_violations,
        "note": "zero rows: empty parameter grid" if not rows else "",
    }
    _finish(man, out / "manifest.json")
    return 0


def cmd_spectrum(args, cfg) -> int:
    out = Path(args.out)
    man = RunManifest("spectrum", cfg.snapshot())
    n_max = args.n_max if args.n_max is not None else cfg["spectrum.n_max"]
    found = spectrum.find_admissible_set(n_max, (cfg["spectrum.v_min"], 0.0))
    if args.v_R is not None:
        tol = cfg["spectrum.match_tol"]
        found = [(n, r) for n, r in found if abs(r - args.v_R) <= tol]
    man.add(emit_csv(
        out / "admissible.csv", ["n", "lambda", "v_R_root"],
        [[n for n, _ in found], [-2.0 * n for n, _ in found], [r for _, r in found]], "admissible",
    ))
    if args.dump_eigenfunctions:
        for n, r in found:
            grid = spectrum.residual_grid(r, cfg["grid.x_min"], 1e-2)
            p, _ = spectrum.eigenfunction_values(n, r, grid.nodes)
            man.add(emit_csv(out / f"eigenfunction_n{n}_vR{r:.10f}.csv", ["v", "p"], [grid.nodes, p], "eigenfunction"))
    man.results = {"admissible": [{"n": n, "lambda": -2.0 * n, "v_R": r} for n, r in found]}
    _finish(man, out / "manifest.json")
    return 0


def _float_list(text: str) -> list:
    text = text.strip()
    return [float(x) for x in text.split(",") if x.strip()] if text else []


COMMANDS = {
    "simulate": cmd_simulate,
    "transform-check": cmd_transform_check,
    "firing-rate": cmd_firing_rate,
    "blowup-scan": cmd_blowup_scan,
    "spectrum": cmd_spectrum,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nnlif", description="Integrate-and-fire population density solvers.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="finite-difference run; rate, mass and final density CSVs")
    s.add_argument("--config", required=True)
    s.add_argument("--horizon", type=float)
    s.add_argument("--rate-cap", type=float)
    s.add_argument("--out-prefix", default="run")

    s = sub.add_parser("transform-check", help="fp solver vs mapped-back integral solve")
    s.add_argument("--config", required=True)
    s.add_argument("--horizon", type=float)
    s.add_argument("--out", default="transform_check.json")

    s = sub.add_parser("firing-rate", help="windowed fixed-point solve for M")
    s.add_argument("--config", required=True)
    s.add_argument("--windows", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--horizon", type=float)
    s.add_argument("--out", default="firing_rate")

    s = sub.add_parser("blowup-scan", help="(b, width) scan for finite-time divergence")
    s.add_argument("--config")
    s.add_argument("--b-values")
    s.add_argument("--widths")
    s.add_argument("--rate-cap", type=float)
    s.add_argument("--out", default="blowup_scan")

    s = sub.add_parser("spectrum", help="admissible even eigenvalues for the linear problem")
    s.add_argument("--config")
    s.add_argument("--v-R", dest="v_R", type=float)
    s.add_argument("--n-max", type=int)
    s.add_argument("--dump-eigenfunctions", action="store_true")
    s.add_argument("--out", default="spectrum")
    return ap


def dispatch(command: str, args, cfg) -> int:
    return COMMANDS[command](args, cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.config is None:
            # spectrum and blowup-scan take their parameters from flags; b0 = 0, v_R = -1 otherwise
            cfg = parse_config(text="b0 = 0\nb = 0\nv_R = -1\n")
        else:
            cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return dispatch(args.command, args, cfg)
    except Exception as exc:  # any module error; partial outputs stay on disk
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
