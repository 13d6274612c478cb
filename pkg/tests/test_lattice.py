import json
import math

import pytest

from strobo.lattice import CodeLayout, GridLayout, Hole, build_code_terms, build_system_hamiltonian, classify_error
from strobo.pauli import PhasedPauli, span_contains


@pytest.mark.parametrize("rows,cols,conn,edges", [(2, 2, "diagonal", 6), (3, 3, "diagonal", 20), (4, 4, "diagonal", 42),
                                                  (3, 3, "nearest", 12)])
def test_edge_counts(rows, cols, conn, edges):
    g = GridLayout(rows, cols, conn)
    assert len(g.edges()) == edges
    h = build_system_hamiltonian(g)
    assert len(h) == edges and all(t.coeff == 1 for t in h)


def test_square_corners_and_types():
    g = GridLayout(3, 3)
    assert g.square_qubits(0, 0) == (0, 1, 4, 3)
    assert GridLayout.square_type(0, 0) == "X" and GridLayout.square_type(0, 1) == "Z"
    assert g.distance(0, 4) == pytest.approx(math.sqrt(2))


def test_degenerate_grid_rejected():
    with pytest.raises(ValueError):
        build_system_hamiltonian(GridLayout(1, 4))


def test_rotated_code_encodes_one_qubit():
    code = build_code_terms(GridLayout(4, 4))
    gens = code.generators
    assert all(a.commutes(b) for a in gens for b in gens)
    assert len(code.vertex_ops) + len(code.plaquette_ops) == 9
    assert code.n - len(gens) == 1
    for kind, ops in code.logical_strings.items():
        for p in ops:
            assert all(p.commutes(g) for g in gens)
            assert not span_contains(gens, p)


def test_hole_removes_one_stabilizer_and_checks_kind():
    code = build_code_terms(GridLayout(4, 4), [Hole((1, 1))])
    assert len(code.generators) == 14
    assert Hole((1, 1)).resolved_kind() == "z_cut"
    assert Hole((0, 1)).resolved_kind() == "x_cut"
    with pytest.raises(ValueError):
        Hole((1, 1), "x_cut").resolved_kind()


def test_classify_error():
    code = build_code_terms(GridLayout(4, 4))
    z = PhasedPauli.single(code.n, 5, "Z")
    c = classify_error(code, z)
    assert c.kind == "detectable" and c.c == len(c.anticommuting) >= 1
    stab = code.vertex_ops[0] * code.vertex_ops[1]
    assert classify_error(code, stab.strip()).kind == "stabilizer-element"
    for p in code.logical_strings["X"]:
        assert classify_error(code, p).kind == "logical"


def test_layout_json_round_trip():
    code = build_code_terms(GridLayout(4, 4), [Hole((1, 1))])
    back = CodeLayout.from_json(json.dumps(code.to_json()))
    assert back.generators == code.generators
    assert back.epsilon0 == code.epsilon0 == -14
