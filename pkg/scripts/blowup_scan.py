"""Excitatory (b, width) scan: regime, crossing time and refinement history per row."""

import argparse
import math
from pathlib import Path

from nnlif.blowup import ScanSettings, blowup_scan
from nnlif.io import emit_csv, emit_json


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/blowup")
    ap.add_argument("--b-values", default="0.5,1,2,4")
    ap.add_argument("--widths", default="0.05,0.1,0.2")
    ap.add_argument("--horizon", type=float, default=1.0)
    args = ap.parse_args()
    bs = [float(x) for x in args.b_values.split(",")]
    ws = [float(x) for x in args.widths.split(",")]
    res = blowup_scan(bs, ws, ScanSettings(horizon=args.horizon))
    out = Path(args.out)
    rows = res.rows
    t_star = ["" if not math.isfinite(r.t_star) else format(r.t_star, ".17g") for r in rows]
    emit_csv(out / "scan.csv", ["b", "width", "regime", "t_star", "rate_peak"],
             [[r.b for r in rows], [r.width for r in rows], [r.regime for r in rows], t_star,
              [r.rate_peak for r in rows]], "scan")
    emit_json({"trend_ok": res.trend_ok, "violations": res.trend_violations,
               "history": {f"{r.b}_{r.width}": [list(h) for h in r.refinement_history] for r in rows}},
              out / "summary.json")
    for r in rows:
        print(f"b={r.b:<4} w={r.width:<5} {r.regime:<24} t*={r.t_star:.4g}  peak={r.rate_peak:.3g}")
    print(f"trend consistent: {res.trend_ok}")


if __name__ == "__main__":
    main()
