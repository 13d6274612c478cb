from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from strobo.magnus import effective_hamiltonian, magnus_exponent, magnus_orders
from strobo.pauli import PhasedPauli, WeightedPauliSum
from strobo.schedule import ScheduleBuilder

X1 = WeightedPauliSum.parse(1, "X1")
Z1 = WeightedPauliSum.parse(1, "Z1")


def _product(segments, dt):
    u = np.eye(1 << segments[0][0].n, dtype=complex)
    for h, d in segments:
        u = sla.expm(-1j * d * dt * h.to_matrix()) @ u
    return u


def test_two_segment_commutator_is_half_y():
    rep = magnus_orders([(X1, 1), (Z1, 1)])
    # BCH: (1/2)[-iZ dt, -iX dt] = -i dt² Y, so the exponent gains dt² Y
    assert rep.exponent[1] == WeightedPauliSum.from_terms(1, [("Y1", 1, 2)])
    # averaged over the two steps: H_eff^(1) = (1/2) dt Y
    assert rep.orders[1] == WeightedPauliSum.from_terms(1, [("Y1", Fraction(1, 2), 1)])
    assert rep.exponent[0] == WeightedPauliSum.from_terms(1, [("X1", 1, 1), ("Z1", 1, 1)])


def test_commuting_segments_have_no_higher_orders():
    rep = magnus_orders([(Z1, 1), (Z1 * 2, 3)])
    assert rep.exponent[1].is_zero() and rep.exponent[2].is_zero()
    assert rep.orders[0] == Z1 * Fraction(7, 4)


def test_order_limits():
    with pytest.raises(ValueError):
        magnus_exponent([X1], max_order=3)
    with pytest.raises(ValueError):
        magnus_orders([])


letters = st.sampled_from("IXYZ")
term = st.tuples(letters, letters, st.integers(-3, 3))


@settings(max_examples=25)
@given(st.lists(st.lists(term, min_size=1, max_size=3), min_size=2, max_size=5), st.integers(0, 2 ** 16))
def test_third_order_truncation_matches_dense_log(seg_terms, seed):
    rng = np.random.default_rng(seed)
    segs = []
    for ts in seg_terms:
        h = WeightedPauliSum.zero(2)
        for a, b, c in ts:
            if a == b == "I" or c == 0:
                continue
            h = h + WeightedPauliSum.from_pauli(PhasedPauli.from_string(f"{a}1 {b}2".replace("I1 ", "").replace(" I2", ""), 2), c)
        segs.append((h, int(rng.integers(1, 3))))
    if all(h.is_zero() for h, _ in segs):
        return
    omega = magnus_orders(segs).omega
    errs = []
    for dt in (2e-2, 1e-2):
        u = _product(segs, dt)
        approx = sla.expm(-1j * omega.to_matrix(dt))
        errs.append(np.linalg.norm(u - approx, 2))
    # local error is fourth order; allow for floating point at the bottom
    assert errs[1] <= errs[0] / 10 + 1e-12


def test_residual_slope_on_random_two_qubit_cycle():
    rng = np.random.default_rng(3)
    paulis = ["X1 X2", "Z1", "Y2", "X1 Z2", "Z1 Z2"]
    segs = []
    for _ in range(4):
        h = sum((WeightedPauliSum.parse(2, p) * float(rng.normal()) for p in paulis), WeightedPauliSum.zero(2))
        segs.append((h, 1))
    omega = magnus_orders(segs).omega
    dts = np.array([4e-2, 2e-2, 1e-2, 5e-3])
    errs = []
    for dt in dts:
        log = sla.logm(_product(segs, dt)) * 1j
        errs.append(np.linalg.norm(log - omega.to_matrix(dt), 2))
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope == pytest.approx(4.0, abs=0.15)


def test_effective_hamiltonian_of_spin_echo():
    b = ScheduleBuilder(1, {"system": Z1})
    b.evolve().pulse("X1").evolve().pulse("X1")
    rep = effective_hamiltonian(b.build(WeightedPauliSum.zero(1)))
    assert rep.omega.is_zero()
    assert rep.metadata["matches_target"]


def test_report_json_has_grading():
    rep = magnus_orders([(X1, 1), (Z1, 1)])
    js = rep.to_json()
    grades = {(g["dt_power"], g["lambda_power"]) for g in js["exponent_grading"]}
    assert (1, 0) in grades and (2, 0) in grades
