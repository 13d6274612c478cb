"""Trotterized code deformation: error against the time-ordered reference vs 1/N_tr."""

import argparse

from strobo.compiler import compile_deformation, deformation_hamiltonian
from strobo.lattice import GridLayout, build_code_terms
from strobo.verifier import deformation_reference, trotter_sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t1", type=float, default=2.0)
    ap.add_argument("--J", type=float, default=1.0)
    ap.add_argument("--n", type=int, nargs="*", default=[8, 16, 32, 64, 128])
    args = ap.parse_args(argv)
    code = build_code_terms(GridLayout(2, 3), boundary="none")
    site, xq = (0, 1), 1
    ref = deformation_reference(deformation_hamiltonian(code, site, xq, J=args.J, t1=args.t1), args.t1, code.n)
    for order in (1, 2):
        rows, fit = trotter_sweep(
            lambda n: compile_deformation(code, site, xq, n, J=args.J, t1=args.t1, order=order), ref, args.n)
        print(f"order {order}: slope {fit.exponent:.4f} ± {fit.stderr:.4f}")
        for inv_n, err in rows:
            print(f"   N = {round(1 / inv_n):>4}  error {err:.4e}")


if __name__ == "__main__":
    main()
