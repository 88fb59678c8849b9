"""Finite-difference solver against the windowed integral solve, for a ladder of grids."""

import argparse
import time
from pathlib import Path

from nnlif import fp_solver
from nnlif.fp_solver import FPSchemeConfig
from nnlif.io import emit_csv
from nnlif.model import Grid1D, ModelParams, Profile, make_initial_density
from nnlif.stefan_map import equivalence_check
from nnlif.volterra import solve_chain


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/equivalence.csv")
    ap.add_argument("--horizon", type=float, default=0.5)
    ap.add_argument("--b0", type=float, default=0.0)
    ap.add_argument("--b", type=float, default=0.0)
    args = ap.parse_args()
    p = ModelParams(args.b0, args.b, -1.0)
    rows = {k: [] for k in ("n_cells", "windows", "sup_norm", "l1", "rate_rel_err", "seconds")}
    for n in (200, 400, 800):
        t0 = time.perf_counter()
        init = make_initial_density(Profile("gaussian", -2.0, 0.5), Grid1D.to_threshold(-8.0, n))
        chain = solve_chain(init, p, args.horizon)
        cps = [w.end_physical.time for w in chain.windows]
        fp = fp_solver.run(init, p, FPSchemeConfig(dt=1e-5), chain.final_state.time, checkpoints=cps)
        rep = equivalence_check(fp, chain)
        for k, v in (("n_cells", n), ("windows", rep.n_times), ("sup_norm", rep.sup_norm), ("l1", rep.l1),
                     ("rate_rel_err", rep.rate_rel_err), ("seconds", time.perf_counter() - t0)):
            rows[k].append(v)
        print(f"n={n}: sup {rep.sup_norm:.2e}  l1 {rep.l1:.2e}  rate {rep.rate_rel_err:.2e}")
    emit_csv(Path(args.out), list(rows), list(rows.values()), "equivalence")


if __name__ == "__main__":
    main()
