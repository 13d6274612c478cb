import json
import math
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from oracles import dense_product
from strobo.compiler import compile_deformation, compile_plaquette
from strobo.decoupling import universal_sequence
from strobo.lattice import GridLayout, build_code_terms
from strobo.pauli import PhasedPauli, WeightedPauliSum
from strobo.schedule import ScheduleBuilder
from strobo.verifier import (
    BathModel,
    NoiseFloorError,
    ResourceCapError,
    catalog_error_terms,
    deformation_reference,
    effective_report,
    eta,
    eta_bound,
    extract_generator,
    fit_scaling,
    pauli_decompose,
    phase_optimized_distance,
    residual_sweep,
    simulate_dense,
    suppression_sweep,
    trotter_sweep,
)
from strobo.compiler import deformation_hamiltonian

DATA = Path(__file__).parent / "data"
ZZ = PhasedPauli.from_string("Z1 Z2", 2).to_matrix()


def test_extract_generator_round_trip():
    u = sla.expm(-1j * 0.05 * ZZ)
    gen, ident = extract_generator(u, 1.0)
    assert gen.allclose(WeightedPauliSum.parse(2, "0.05 Z1 Z2"))
    assert abs(ident) < 1e-12


@given(st.integers(0, 2 ** 16))
def test_pauli_decompose_matches_trace_formula(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    m = a + a.conj().T
    dec = pauli_decompose(m)
    assert np.allclose(dec.to_matrix(), m, atol=1e-10)
    p = PhasedPauli.from_string("X1 Y3", 3)
    coeff = np.trace(p.to_matrix().conj().T @ m) / 8
    got = sum(float(t.coeff) for t in dec if t.pauli.x == p.x and t.pauli.z == p.z)
    assert got == pytest.approx(coeff.real, abs=1e-10) and abs(coeff.imag) < 1e-12


def test_phase_optimized_distance_recovers_phase():
    u = sla.expm(-1j * 0.3 * ZZ)
    d, phi = phase_optimized_distance(np.exp(0.2j) * u, u)
    assert d < 1e-8 and phi == pytest.approx(0.2, abs=1e-6)


def test_dense_simulation_matches_event_product():
    s = compile_plaquette().schedule
    u = simulate_dense(s, None, 2e-2)
    assert np.allclose(u.matrix, dense_product(s, 2e-2), atol=1e-10)
    assert u.time == pytest.approx(40 * 2e-2)


def test_bath_at_zero_coupling_factorizes():
    rng = np.random.default_rng(1)
    bath = BathModel.random(4, 1, lam=0.2, rng=rng)
    s = compile_plaquette().schedule
    u = simulate_dense(s, bath, 1e-2, lambda_value=0.0)
    ub = sla.expm(-1j * u.time * bath.H_B.to_matrix())
    assert np.allclose(u.matrix, np.kron(dense_product(s, 1e-2), ub), atol=1e-10)


def test_resource_cap():
    s = ScheduleBuilder(15, {"system": WeightedPauliSum.parse(15, "Z1")}).evolve().build(cyclic=False)
    with pytest.raises(ResourceCapError):
        simulate_dense(s)


def test_fit_scaling_synthetic(rng):
    xs = np.logspace(-3, -1, 6)
    ys = 3.0 * xs ** 4 * np.exp(rng.normal(scale=0.01, size=xs.size))
    fit = fit_scaling(zip(xs, ys))
    assert fit.exponent == pytest.approx(4.0, abs=0.05) and fit.r2 > 0.999
    lo, hi = fit.interval()
    assert lo < fit.exponent < hi
    with pytest.raises(ValueError):
        fit_scaling([(1, 1), (2, 2), (3, 3)])
    with pytest.raises(NoiseFloorError):
        fit_scaling([(x, 1e-16) for x in xs])


def test_plaquette_residual_sweep():
    rep = compile_plaquette()
    reports, fit = residual_sweep(rep.schedule, [4e-2, 2e-2, 1e-2, 5e-3], rep.declared_target)
    assert fit.exponent == pytest.approx(4.0, abs=0.1)
    r = effective_report(rep.schedule, 1e-2, rep.declared_target)
    assert r.coefficient("X1 X2 X3 X4") == pytest.approx(64e-6, rel=2e-3)


def test_eta_vanishes_without_coupling():
    h = WeightedPauliSum.parse(2, "X1 X2 + Y1 Y2 + Z1 Z2")
    s = universal_sequence(2).to_schedule({"system": h})
    bath = BathModel.random(2, 1, lam=0.1, rng=np.random.default_rng(5))
    assert eta(s, bath, 1e-2, lambda_value=0.0) <= 1e-10
    assert eta(s, bath, 1e-2) > 1e-6


def test_eta_bound_golden():
    cases = json.loads((DATA / "eta_bound_golden.json").read_text())["cases"]
    for c in cases:
        got = eta_bound(c["params"], c["norms"], c["n_dd"], c["dt"], c["lambda"])
        for key, val in c["expected"].items():
            assert got[key] == pytest.approx(val, rel=1e-12, abs=1e-300)
    with pytest.raises(ValueError):
        eta_bound(cases[0]["params"], {"hsb": -1, "hbx": 0}, 8, 1e-2, 0.1)


def _single_plaquette():
    return build_code_terms(GridLayout(2, 2), boundary="none")


def test_suppression_detectable_error_shrinks_with_gap():
    code = _single_plaquette()
    bath = BathModel(1, WeightedPauliSum.parse(1, "0.7 Z1 + 0.3 X1"))
    hs = [1.0, 10.0, 100.0]
    out = suppression_sweep(code, bath, hs, 0.1, 4, WeightedPauliSum.parse(4, "Z1"), time_points=401)
    assert all(r.classification[0][1] == "detectable" for r in out)
    slope = np.polyfit(np.log(hs), np.log([r.F_norm for r in out]), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.05)


def test_suppression_stabilizer_shift():
    code = _single_plaquette()
    out = suppression_sweep(code, None, [5.0], 0.1, 4, WeightedPauliSum.parse(4, "X1 X2 X3 X4"), time_points=51)
    r = out[0]
    assert r.leakage < 1e-12
    assert r.coefficient_shift == pytest.approx(0.1, abs=1e-9) and r.shift_residual < 1e-9


def test_catalog_bounds_hold_on_small_lattice():
    grid = GridLayout(2, 2)
    bath = BathModel.lattice(grid, lam=0.1)
    cat = catalog_error_terms(3, 1, layout=grid, bath=bath, n_dd=8, enumerate_terms=True)
    assert cat.count_bound == 8 ** 3 * 12 and cat.locality_bound == 3
    assert cat.count > 0 and not cat.violations
    assert max(w for w, _, _ in cat.terms.values()) <= cat.locality_bound
    assert catalog_error_terms(3, 0, layout=grid, bath=bath, enumerate_terms=True).count == 0


def test_catalog_without_enumeration():
    cat = catalog_error_terms(4, 2, k_local=2, l_local=1)
    assert cat.locality_bound == 2 + 2 and cat.terms is None
    with pytest.raises(ValueError):
        catalog_error_terms(4, 2, enumerate_terms=True)


def test_trotter_first_order_slope():
    code = build_code_terms(GridLayout(2, 3), boundary="none")
    h_at = deformation_hamiltonian(code, (0, 1), 1, J=1.0, t1=2.0)
    ref = deformation_reference(h_at, 2.0, code.n)
    rows, fit = trotter_sweep(lambda n: compile_deformation(code, (0, 1), 1, n, t1=2.0), ref, [8, 16, 32, 64])
    assert fit.exponent == pytest.approx(1.0, abs=0.05)
