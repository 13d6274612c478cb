"""Linear vs quadratic λ-coefficients of the cycle deviation for U_sec and its λ¹ extension.

Runs a 2×2 system with one bath qubit, random 1-local couplings, and either
the random bath Hamiltonian or ``H_B = 0``.
"""

import argparse

import numpy as np

from strobo.decoupling import lambda1_extension, universal_sequence
from strobo.lattice import GridLayout, build_system_hamiltonian
from strobo.pauli import WeightedPauliSum
from strobo.verifier import BathModel, lambda_polynomial


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--lam", type=float, default=0.1)
    args = ap.parse_args(argv)
    hx = build_system_hamiltonian(GridLayout(2, 2))
    base = BathModel.random(4, 1, lam=args.lam, rng=args.seed)
    baths = {"random H_B": base, "H_B = 0": BathModel(1, WeightedPauliSum.zero(1), base.couplings, args.lam)}
    seqs = {"U_sec": universal_sequence(4), "U_sec+x": lambda1_extension(universal_sequence(4))}
    print(f"{'bath':<12}{'sequence':<10}{'dt':>10}{'linear':>13}{'quadratic':>13}{'ratio':>10}")
    for bname, bath in baths.items():
        for sname, seq in seqs.items():
            s = seq.to_schedule({"system": hx})
            for dt in np.logspace(-2, -4, 5):
                p = lambda_polynomial(s, bath, dt, args.lam)
                print(f"{bname:<12}{sname:<10}{dt:>10.1e}{p['linear']:>13.3e}{p['quadratic']:>13.3e}{p['ratio']:>10.3g}")


if __name__ == "__main__":
    main()
