"""Energy-gap suppression on the single-plaquette code with one bath qubit.

For each perturbation ``V`` the gap ``h`` is swept over ``[1, 100]`` and the
envelope of ``‖F(t)‖`` is fitted against ``h``.
"""

import argparse
import json

import numpy as np

from strobo.lattice import GridLayout, build_code_terms
from strobo.pauli import WeightedPauliSum
from strobo.verifier import BathModel, suppression_sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--g", type=float, default=0.1)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--points", type=int, default=7)
    ap.add_argument("--json", help="write all reports here")
    ap.add_argument("--V", nargs="*", default=["Z1", "X1", "Z1 Z2", "X1 X2 X3 X4", "Y1"])
    args = ap.parse_args(argv)
    code = build_code_terms(GridLayout(2, 2), boundary="none")
    bath = BathModel(1, WeightedPauliSum.parse(1, "0.7 Z1 + 0.3 X1"))
    hs = np.logspace(0, 2, args.points)
    dump = {}
    for v in args.V:
        out = suppression_sweep(code, bath, hs, args.g, args.k, WeightedPauliSum.parse(code.n, v))
        kind = out[0].classification[0][1]
        slope = np.polyfit(np.log(hs), np.log([r.F_norm for r in out]), 1)[0]
        dev_slope = np.polyfit(np.log(hs), np.log([max(r.deviation, 1e-300) for r in out]), 1)[0]
        extra = ""
        if out[0].coefficient_shift is not None:
            extra = f", shift {out[0].coefficient_shift:.4f}, leakage {max(r.leakage for r in out):.1e}"
        print(f"V = {v:<12} {kind:<19} F slope {slope:+.3f}, deviation slope {dev_slope:+.3f}{extra}")
        dump[v] = [r.to_json() for r in out]
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(dump, fh, indent=1)


if __name__ == "__main__":
    main()
