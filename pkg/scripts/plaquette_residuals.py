"""Residual of the extracted cycle exponent against the declared target, vs δt.

Covers the 40-step plaquette, the 20-step nearest-neighbour variant and the
single-body boundary construction.  Writes one CSV row per (schedule, δt).
"""

import argparse
import csv
import sys

import numpy as np

from strobo.compiler import compile_boundary, compile_nn_vertex, compile_plaquette
from strobo.verifier import residual_sweep

BUILDERS = {
    "plaquette": compile_plaquette,
    "nn_vertex": compile_nn_vertex,
    "single_body": lambda: compile_boundary("single_body"),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=8)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)
    dts = np.logspace(-3, -1.5, args.points)
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(out)
    w.writerow(["schedule", "steps", "dt", "residual", "slope"])
    for name, build in BUILDERS.items():
        rep = build()
        reports, fit = residual_sweep(rep.schedule, dts, rep.declared_target)
        for r in reports:
            w.writerow([name, rep.step_count, f"{r.dt_value:.6e}", f"{r.residual_norm:.6e}", f"{fit.exponent:.4f}"])
        print(f"{name}: slope {fit.exponent:.4f} ± {fit.stderr:.4f}", file=sys.stderr)


if __name__ == "__main__":
    main()
