import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import dense_product
from strobo.compiler import compile_plaquette
from strobo.decoupling import (
    DDSequence,
    interleave,
    lambda1_extension,
    lower_bound_check,
    random_pauli_pulses,
    symmetrize_local,
    symmetrize_protecting,
    twirl,
    universal_sequence,
    window_errors,
)
from strobo.magnus import effective_hamiltonian
from strobo.pauli import CliffordLayer, PhasedPauli, WeightedPauliSum, gf2_rank, span_contains


def _all_paulis(n):
    for x in range(1 << n):
        for z in range(1 << n):
            if x | z:
                yield PhasedPauli(n, x, z)


def test_universal_sequence_shape():
    seq = universal_sequence(3)
    assert seq.n_segments == 8 and lambda1_extension(seq).n_segments == 16
    pulses = seq.pulses
    assert len(pulses) == 9
    # pulses multiply back to the identity
    total = CliffordLayer.identity(3)
    for p in pulses:
        total = p @ total
    assert total.is_identity()


def test_universal_sequence_averages_single_qubit_terms():
    seq = universal_sequence(2)
    for p in ("X1", "Y2", "Z1", "X1 Z2"):
        assert seq.average(WeightedPauliSum.parse(2, p)).is_zero()
    # even-weight uniform strings commute with every global Pauli
    assert seq.average(WeightedPauliSum.parse(2, "Y1 Y2")) == WeightedPauliSum.parse(2, "8 Y1 Y2")


def test_universal_first_order_dense_cancellation():
    h = WeightedPauliSum.parse(2, "0.7 X1 + 0.3 Z2 + 0.2 X1 Y2")
    s = universal_sequence(2).to_schedule({"system": h})
    rep = effective_hamiltonian(s, max_order=0)
    assert rep.term(1).is_zero()
    dt = 1e-3
    u = dense_product(s, dt)
    # leftover is at least second order in δt
    assert np.linalg.norm(u - np.eye(4) * np.trace(u) / 4, 2) < 50 * dt ** 2


def test_protecting_counts():
    assert symmetrize_protecting(["X1 X2", "X2 X3", "X3 X4"]).n_segments == 32
    assert symmetrize_protecting(["X1 X2 X3 X4", "Z1 Z2 Z3 Z4"]).n_segments == 64


@given(st.integers(0, 2 ** 12 - 1))
def test_protecting_twirl_projects_onto_group(seed):
    rng = np.random.default_rng(seed)
    n = 3
    gens = [p for p in random_pauli_pulses(n, 2, rng) if p.x | p.z]
    gens = [g for g in gens if all(g.commutes(h) for h in gens)] or [PhasedPauli.from_string("Z1", n)]
    if gf2_rank(gens) < len(gens):
        gens = gens[:1]
    seq = symmetrize_protecting(gens, n)

    for p in _all_paulis(n):
        tw = twirl(seq.frames, p)
        if span_contains(gens, p):
            assert tw == WeightedPauliSum.from_pauli(p) * seq.n_segments
        else:
            assert tw.is_zero()


@pytest.mark.parametrize("l,D,dims,pulses,errors", [
    (1, 1, (10,), 4, 30),
    (2, 1, (6,), 16, 63),
    (1, 2, (3, 3), 4, 27),
])
def test_local_sequences_remove_window_errors(l, D, dims, pulses, errors):
    seq = symmetrize_local(l, D, dims)
    errs = window_errors(l, dims)
    assert seq.n_segments == pulses and len(errs) == errors
    assert all(twirl(seq.frames, e).is_zero() for e in errs)


def test_local_two_dimensional_block_count():
    assert symmetrize_local(2, 2, (4, 4)).n_segments == 256
    assert len(window_errors(2, (4, 4))) == 2127


def test_local_sequence_caps_and_filter():
    with pytest.raises(ValueError):
        symmetrize_local(3, 2, (6, 6))
    h = WeightedPauliSum.parse(6, "X1 X2 + X3 X4 + X5 X6")
    seq = symmetrize_local(2, 1, (6,), commuting_with=h)
    assert seq.n_segments == 8 and seq.commutes_with(h)  # half of the 16 two-cell patterns


def test_lower_bound_forces_invariant_error(rng):
    for _ in range(20):
        pulses = random_pauli_pulses(16, 3, rng)
        out = lower_bound_check(16, pulses)
        assert out["forced"] and out["collision"] is not None
        inv = PhasedPauli.from_string(out["invariant_error"], 16)
        assert all(inv.commutes(p) for p in pulses)


def test_lower_bound_distinct_signatures():
    pulses = ["X1 X3 X5 X7", "X2 X3 X6 X7", "X4 X5 X6 X7"]
    out = lower_bound_check(7, pulses)
    assert not out["forced"] and out["collision"] is None
    assert len(set(out["signatures"])) == 7


def test_interleave_with_plaquette():
    sim = compile_plaquette().schedule
    out = interleave(universal_sequence(4), sim)
    assert out.step_count == 320
    assert out.declared_target == WeightedPauliSum.from_terms(4, [("X1 X2 X3 X4", 64 * 512, 3)])
    assert effective_hamiltonian(out).metadata["matches_target"]


def test_interleave_rejects_mismatched_register():
    with pytest.raises(ValueError):
        interleave(universal_sequence(3), compile_plaquette().schedule)


def test_frame_register_checked():
    with pytest.raises(ValueError):
        DDSequence((CliffordLayer.identity(2),), 3)


def _bath_grading(seq, with_hb: bool):
    from strobo.lattice import GridLayout, build_system_hamiltonian
    from strobo.verifier import BathModel

    hx = build_system_hamiltonian(GridLayout(2, 2))
    bath = BathModel.random(4, 1, lam=0.1, rng=7)
    hb = bath.H_B if with_hb else WeightedPauliSum.zero(1)
    b = BathModel(1, hb, bath.couplings, 0.1)
    h = hx.embed(5) + b.h_b(4) + b.h_sb(4)
    rep = effective_hamiltonian(seq.embed(5).to_schedule({"system": h}))
    return {g: len(t.chop(1e-12)) for g, t in rep.grading().items()}


@pytest.mark.parametrize("with_hb", [False, True])
def test_usec_has_no_second_order_terms(with_hb):
    grades = _bath_grading(universal_sequence(4), with_hb)
    assert all(count == 0 for (a, _), count in grades.items() if a == 2)
    assert grades[(3, 1)] > 0


def test_lambda1_extension_needs_static_bath():
    ext = lambda1_extension(universal_sequence(4))
    assert _bath_grading(ext, with_hb=False)[(3, 1)] == 0
    # a bath Hamiltonian that does not commute with the couplings leaves λ¹ δt³ terms behind
    assert _bath_grading(ext, with_hb=True)[(3, 1)] > 0


def test_lambda1_extension_dense_scaling_without_bath_hamiltonian():
    from strobo.lattice import GridLayout, build_system_hamiltonian
    from strobo.verifier import BathModel, lambda_polynomial

    hx = build_system_hamiltonian(GridLayout(2, 2))
    base = BathModel.random(4, 1, lam=0.1, rng=7)
    bath = BathModel(1, WeightedPauliSum.zero(1), base.couplings, 0.1)
    s = lambda1_extension(universal_sequence(4)).to_schedule({"system": hx})
    dts = [1e-2, 5e-3, 2.5e-3]
    polys = [lambda_polynomial(s, bath, dt, 0.1) for dt in dts]
    lin = np.polyfit(np.log(dts), np.log([p["linear"] for p in polys]), 1)[0]
    quad = np.polyfit(np.log(dts), np.log([p["quadratic"] for p in polys]), 1)[0]
    assert lin == pytest.approx(4.0, abs=0.2) and quad == pytest.approx(3.0, abs=0.2)
