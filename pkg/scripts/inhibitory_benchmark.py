"""Inhibitory benchmark: mass history, firing rate and certified window lengths up to t = 5."""

import argparse
import time
from pathlib import Path

from nnlif import fp_solver
from nnlif.blowup import DetectorConfig, continue_solution, monotonicity_audit
from nnlif.fp_solver import FPSchemeConfig
from nnlif.io import emit_csv, emit_json
from nnlif.model import Grid1D, ModelParams, Profile, make_initial_density
from nnlif.stefan_map import boundary_from_rate_series


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/inhibitory")
    ap.add_argument("--horizon", type=float, default=5.0)
    ap.add_argument("--n-cells", type=int, default=800)
    args = ap.parse_args()
    out = Path(args.out)
    p = ModelParams(-1.0, -1.0, -1.0)
    init = make_initial_density(Profile("gaussian", -2.0, 0.5), Grid1D.to_threshold(-8.0, args.n_cells))

    t0 = time.perf_counter()
    run = fp_solver.run(init, p, FPSchemeConfig(dt=1e-5), min(args.horizon, 2.0), record_every=100)
    emit_csv(out / "mass.csv", ["t", "mass"], list(run.mass_series), "mass")
    print(f"mass: max deviation {fp_solver.conservation_report(run):.2e} ({time.perf_counter() - t0:.1f} s)")

    res = continue_solution(init, p, args.horizon, DetectorConfig())
    emit_csv(out / "rate.csv", ["t", "N"], [res.rate_series.times, res.rate_series.rates], "rate")
    emit_csv(out / "windows.csv", ["t_start", "length"], [res.window_starts, res.window_lengths], "windows")
    audit = monotonicity_audit(boundary_from_rate_series(res.rate_series, p), p)
    summary = dict(res.as_dict(), window_floor_ok=res.window_floor_ok, audit=audit.status)
    emit_json(summary, out / "summary.json")
    print(f"continuation: {res.regime}, {res.window_lengths.size} windows, floor ok {res.window_floor_ok}, "
          f"audit {audit.status}")


if __name__ == "__main__":
    main()
