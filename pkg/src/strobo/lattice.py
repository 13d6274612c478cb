"""Square-grid geometry, the XX resource Hamiltonian and surface-code terms.

Qubit ``(r, c)`` has index ``r * cols + c``.  Unit squares are addressed by
their top-left corner ``(pr, pc)`` (0-based); the four corner qubits are
labelled 1..4 cyclically as top-left, top-right, bottom-right, bottom-left.

Squares with ``pr + pc`` even carry X-type operators ``A_v`` and the others
carry Z-type operators ``B_p``, giving the usual checkerboard layout.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .pauli import PhasedPauli, WeightedPauliSum, _reduce_basis, span_contains

__all__ = [
    "GridLayout",
    "Stabilizer",
    "Hole",
    "CodeLayout",
    "ErrorClassification",
    "build_system_hamiltonian",
    "build_code_terms",
    "classify_error",
]

CONNECTIVITIES = ("diagonal", "nearest")


@dataclass(frozen=True)
class GridLayout:
    rows: int
    cols: int
    connectivity: str = "diagonal"
    periodic: bool = False

    def __post_init__(self):
        if self.connectivity not in CONNECTIVITIES:
            raise ValueError(f"connectivity must be one of {CONNECTIVITIES}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs positive dimensions")
        if self.periodic and (self.rows < 3 or self.cols < 3):
            raise ValueError("periodic grids need at least 3 rows and columns")

    @property
    def n(self) -> int:
        return self.rows * self.cols

    def index(self, r: int, c: int) -> int:
        if self.periodic:
            r, c = r % self.rows, c % self.cols
        elif not (0 <= r < self.rows and 0 <= c < self.cols):
            raise IndexError(f"site ({r}, {c}) outside the grid")
        return r * self.cols + c

    def coords(self, q: int) -> tuple[int, int]:
        return divmod(q, self.cols)

    def distance(self, i: int, j: int) -> float:
        (r1, c1), (r2, c2) = self.coords(i), self.coords(j)
        dr, dc = abs(r1 - r2), abs(c1 - c2)
        if self.periodic:
            dr, dc = min(dr, self.rows - dr), min(dc, self.cols - dc)
        return math.hypot(dr, dc)

    def diameter(self, qubits: Iterable[int]) -> float:
        qs = list(qubits)
        return max((self.distance(a, b) for i, a in enumerate(qs) for b in qs[i + 1:]), default=0.0)

    def edges(self) -> list[tuple[int, int]]:
        steps = [(0, 1), (1, 0)]
        if self.connectivity == "diagonal":
            steps += [(1, 1), (1, -1)]
        out = set()
        for r in range(self.rows):
            for c in range(self.cols):
                for dr, dc in steps:
                    r2, c2 = r + dr, c + dc
                    if not self.periodic and not (0 <= r2 < self.rows and 0 <= c2 < self.cols):
                        continue
                    a, b = self.index(r, c), self.index(r2, c2)
                    out.add((min(a, b), max(a, b)))
        return sorted(out)

    def squares(self) -> list[tuple[int, int]]:
        pr_max = self.rows if self.periodic else self.rows - 1
        pc_max = self.cols if self.periodic else self.cols - 1
        return [(pr, pc) for pr in range(pr_max) for pc in range(pc_max)]

    def square_qubits(self, pr: int, pc: int) -> tuple[int, int, int, int]:
        """Corner qubits labelled 1..4: TL, TR, BR, BL."""
        return (
            self.index(pr, pc),
            self.index(pr, pc + 1),
            self.index(pr + 1, pc + 1),
            self.index(pr + 1, pc),
        )

    @staticmethod
    def square_type(pr: int, pc: int) -> str:
        return "X" if (pr + pc) % 2 == 0 else "Z"

    def to_json(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "connectivity": self.connectivity, "periodic": self.periodic}


def build_system_hamiltonian(grid: GridLayout) -> WeightedPauliSum:
    """Unit-coefficient ``X_i X_j`` on every edge of the selected connectivity."""
    if grid.rows < 2 or grid.cols < 2:
        raise ValueError("degenerate grid: need at least 2 rows and 2 columns")
    return WeightedPauliSum(grid.n, {((1 << a) | (1 << b), 0, 0, 0): 1 for a, b in grid.edges()})


@dataclass(frozen=True)
class Stabilizer:
    kind: str  # "X" or "Z"
    qubits: tuple[int, ...]
    square: tuple[int, int] | None = None
    boundary: bool = False

    def pauli(self, n: int) -> PhasedPauli:
        mask = sum(1 << q for q in self.qubits)
        return PhasedPauli(n, mask, 0) if self.kind == "X" else PhasedPauli(n, 0, mask)


@dataclass(frozen=True)
class Hole:
    """A disabled bulk stabilizer.

    Removing an X-type square lets Z strings end there, so it is a ``z_cut``;
    removing a Z-type square is an ``x_cut``.
    """

    square: tuple[int, int]
    kind: str | None = None

    def resolved_kind(self) -> str:
        natural = "z_cut" if GridLayout.square_type(*self.square) == "X" else "x_cut"
        if self.kind is not None and self.kind != natural:
            raise ValueError(f"square {self.square} is {GridLayout.square_type(*self.square)}-type; hole kind must be {natural}")
        return natural


@dataclass(frozen=True)
class ErrorClassification:
    kind: str  # detectable | stabilizer-element | logical
    c: int
    anticommuting: tuple[int, ...] = ()


@dataclass(frozen=True)
class CodeLayout:
    grid: GridLayout
    stabilizers: tuple[Stabilizer, ...]
    holes: tuple[Hole, ...] = ()
    boundary: str = "rotated"
    coupling_sign: int = -1
    logical_strings: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def vertex_ops(self) -> list[PhasedPauli]:
        return [s.pauli(self.n) for s in self.stabilizers if s.kind == "X" and not s.boundary]

    @property
    def plaquette_ops(self) -> list[PhasedPauli]:
        return [s.pauli(self.n) for s in self.stabilizers if s.kind == "Z" and not s.boundary]

    @property
    def boundary_ops(self) -> list[PhasedPauli]:
        return [s.pauli(self.n) for s in self.stabilizers if s.boundary]

    @property
    def generators(self) -> list[PhasedPauli]:
        return [s.pauli(self.n) for s in self.stabilizers]

    @property
    def epsilon0(self) -> int:
        """Codespace eigenvalue of ``H_p`` (all stabilizers at +1)."""
        return self.coupling_sign * len(self.stabilizers)

    @property
    def hole_squares(self) -> set:
        return {h.square for h in self.holes}

    def bulk_squares(self) -> list[tuple[int, int]]:
        return [s.square for s in self.stabilizers if s.square is not None and not s.boundary]

    def penalty_hamiltonian(self, bulk_only: bool = False) -> WeightedPauliSum:
        terms = [(s.pauli(self.n), self.coupling_sign) for s in self.stabilizers if not (bulk_only and s.boundary)]
        return WeightedPauliSum.from_terms(self.n, terms)

    def bulk_sum(self) -> WeightedPauliSum:
        """``Σ A_v + Σ B_p`` over enabled 4-body stabilizers, unit coefficients."""
        return WeightedPauliSum.from_terms(self.n, [(s.pauli(self.n), 1) for s in self.stabilizers if not s.boundary])

    def to_json(self) -> dict:
        return {
            "grid": self.grid.to_json(),
            "boundary": self.boundary,
            "coupling_sign": self.coupling_sign,
            "holes": [{"square": list(h.square), "kind": h.resolved_kind()} for h in self.holes],
            "vertex_ops": [str(p) for p in self.vertex_ops],
            "plaquette_ops": [str(p) for p in self.plaquette_ops],
            "boundary_ops": [str(p) for p in self.boundary_ops],
            "logical_strings": {k: [str(p) for p in v] for k, v in self.logical_strings.items()},
            "epsilon0": self.epsilon0,
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "CodeLayout":
        if isinstance(data, str):
            data = json.loads(data)
        grid = GridLayout(**data["grid"])
        holes = [Hole(tuple(h["square"]), h.get("kind")) for h in data.get("holes", [])]
        code = build_code_terms(grid, holes, boundary=data.get("boundary", "rotated"), coupling_sign=data.get("coupling_sign", -1))
        stored = {k: sorted(data.get(k, [])) for k in ("vertex_ops", "plaquette_ops", "boundary_ops")}
        rebuilt = {k: sorted(v) for k, v in code.to_json().items() if k in stored}
        if any(stored[k] and stored[k] != rebuilt[k] for k in stored):
            raise ValueError("stored stabilizer lists disagree with the rebuilt layout")
        return code


def _boundary_stabilizers(grid: GridLayout) -> list[Stabilizer]:
    """Weight-2 truncated terms of a rotated patch: X on top/bottom, Z on left/right."""
    out = []
    R, C = grid.rows, grid.cols
    for c in range(C - 1):
        if GridLayout.square_type(-1, c) == "X":
            out.append(Stabilizer("X", (grid.index(0, c), grid.index(0, c + 1)), (-1, c), True))
        if GridLayout.square_type(R - 1, c) == "X":
            out.append(Stabilizer("X", (grid.index(R - 1, c), grid.index(R - 1, c + 1)), (R - 1, c), True))
    for r in range(R - 1):
        if GridLayout.square_type(r, -1) == "Z":
            out.append(Stabilizer("Z", (grid.index(r, 0), grid.index(r + 1, 0)), (r, -1), True))
        if GridLayout.square_type(r, C - 1) == "Z":
            out.append(Stabilizer("Z", (grid.index(r, C - 1), grid.index(r + 1, C - 1)), (r, C - 1), True))
    return out


def build_code_terms(
    grid: GridLayout,
    holes: Sequence[Hole | tuple] = (),
    boundary: str = "rotated",
    coupling_sign: int = -1,
) -> CodeLayout:
    """Enabled stabilizers of a surface-code patch (or torus) with holes removed.

    ``boundary`` is ``"rotated"`` (weight-2 truncated terms on the patch edge)
    or ``"none"`` (bulk squares only).  Periodic grids ignore it.
    """
    if boundary not in ("rotated", "none"):
        raise ValueError("boundary must be 'rotated' or 'none'")
    if coupling_sign not in (1, -1):
        raise ValueError("coupling_sign must be +1 or -1")
    if grid.rows < 2 or grid.cols < 2:
        raise ValueError("degenerate grid: need at least 2 rows and 2 columns")
    if grid.periodic and (grid.rows % 2 or grid.cols % 2):
        raise ValueError("periodic layouts need even dimensions for a consistent checkerboard")
    squares = grid.squares()
    hole_list = [h if isinstance(h, Hole) else Hole(tuple(h)) for h in holes]
    seen = set()
    for h in hole_list:
        if h.square in seen:
            raise ValueError(f"overlapping hole specs at square {h.square}")
        if h.square not in squares:
            raise ValueError(f"hole square {h.square} is not a stabilizer of this grid")
        h.resolved_kind()
        seen.add(h.square)
    stabs = [
        Stabilizer(GridLayout.square_type(pr, pc), grid.square_qubits(pr, pc), (pr, pc))
        for pr, pc in squares
        if (pr, pc) not in seen
    ]
    if not grid.periodic and boundary == "rotated":
        stabs += _boundary_stabilizers(grid)
    stabs.sort(key=lambda s: (s.boundary, s.kind, s.square))
    code = CodeLayout(grid, tuple(stabs), tuple(hole_list), "none" if grid.periodic else boundary, coupling_sign)
    gens = code.generators
    for i, a in enumerate(gens):
        for b in gens[i + 1:]:
            if not a.commutes(b):
                raise ValueError(f"stabilizers {a} and {b} do not commute")
    object.__setattr__(code, "logical_strings", _logicals(code))
    return code


def _nullspace(rows: list[int], nbits: int) -> list[int]:
    from .pauli import _gf2_nullspace

    return _gf2_nullspace(rows, nbits)


def _in_span(basis: dict, v: int) -> bool:
    while v:
        top = v.bit_length() - 1
        if top not in basis:
            return False
        v ^= basis[top]
    return True


def _logicals(code: CodeLayout) -> dict:
    """Low-weight representatives of the X- and Z-type logical classes."""
    n = code.n
    xs = [sum(1 << q for q in s.qubits) for s in code.stabilizers if s.kind == "X"]
    zs = [sum(1 << q for q in s.qubits) for s in code.stabilizers if s.kind == "Z"]
    out = {}
    for kind, same, other in (("X", xs, zs), ("Z", zs, xs)):
        basis = _reduce_basis(same)
        reps = []
        for v in _nullspace(other, n):
            if _in_span(basis, v):
                continue
            v = _reduce_weight(v, same)
            reps.append(v)
            basis = _reduce_basis(list(basis.values()) + [v])
        reps.sort(key=lambda v: (v.bit_count(), v))
        out[kind] = [PhasedPauli(n, v, 0) if kind == "X" else PhasedPauli(n, 0, v) for v in reps]
    return out


def _reduce_weight(v: int, stabs: list[int]) -> int:
    improved = True
    while improved:
        improved = False
        for s in stabs:
            if (v ^ s).bit_count() < v.bit_count():
                v ^= s
                improved = True
    return v


def classify_error(code: CodeLayout, e: PhasedPauli) -> ErrorClassification:
    """Count anticommuting enabled stabilizers and place ``e`` in its class."""
    if e.n != code.n:
        if (e.x | e.z) >> code.n:
            raise ValueError("error operator acts outside the code qubits")
        e = PhasedPauli(code.n, e.x, e.z)
    gens = code.generators
    anti = tuple(i for i, g in enumerate(gens) if not g.commutes(e))
    if anti:
        return ErrorClassification("detectable", len(anti), anti)
    if span_contains(gens, e):
        return ErrorClassification("stabilizer-element", 0)
    return ErrorClassification("logical", 0)
