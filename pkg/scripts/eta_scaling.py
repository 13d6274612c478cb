"""Effective noise strength η of the universal sequence vs δt, next to the parametric bound.

The bound constants ``c0..c3`` default to 1; the script reports the ratio
``η / bound`` so that constants can be read off from the data.
"""

import argparse

import numpy as np

from strobo.decoupling import lambda1_extension, universal_sequence
from strobo.lattice import GridLayout, build_system_hamiltonian
from strobo.verifier import BathModel, eta, eta_bound, spectral_norm


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--lam", type=float, default=0.1)
    ap.add_argument("--extend", action="store_true", help="use the λ¹ extension (16 segments)")
    args = ap.parse_args(argv)
    hx = build_system_hamiltonian(GridLayout(2, 2))
    bath = BathModel.random(4, 1, lam=args.lam, rng=args.seed)
    seq = universal_sequence(4)
    if args.extend:
        seq = lambda1_extension(seq)
    s = seq.to_schedule({"system": hx})
    norms = {
        "hsb": spectral_norm(bath.h_sb(4).to_matrix(1.0, 1.0)),
        "hbx": spectral_norm((hx.embed(5) + bath.h_b(4)).to_matrix()),
    }
    params = {"c0": 1, "c1": 1, "c2": 1, "c3": 1}
    print(f"N_DD = {seq.n_segments}, ||H_SB|| = {norms['hsb']:.3f}, ||H_B + H_X|| = {norms['hbx']:.3f}")
    print(f"{'dt':>10}{'eta':>13}{'bound':>13}{'ratio':>10}")
    rows = []
    for dt in np.logspace(-1.5, -3, 6):
        e = eta(s, bath, dt)
        b = eta_bound(params, norms, seq.n_segments, dt, args.lam)["eta"]
        rows.append((dt, e))
        print(f"{dt:>10.2e}{e:>13.4e}{b:>13.4e}{e / b:>10.3g}")
    slope = np.polyfit(*np.log(np.array(rows)).T, 1)[0]
    print(f"log-log slope of eta: {slope:.3f}")


if __name__ == "__main__":
    main()
