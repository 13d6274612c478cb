"""Pulse-schedule compilers for 4-body stabilizer terms from XX couplings.

Every construction is expressed as a list of ``(frame, event)`` pairs, where
``frame`` is the cumulative Clifford pulse in force while the event runs.
Pulses between events are recovered as frame differences, so adjacent pulses
are always fused into one layer.

Component Hamiltonians on a square with corner labels 1..4 (see
``lattice.GridLayout.square_qubits``) are produced by Pauli masks ``u`` and a
local Clifford ``C``:

    a: C = W1 W2, u = Z1 Z2   ->  2(Z1 Z2 + X3 X4) δt
    b: C = S1,    u = Z1 Z4   ->  2(Y1 X4 + X2 X3) δt
    c: C = S2,    u = Z1 Z4   ->  2(X1 X4 + Y2 X3) δt

The group-commutator word ``a b ā b̄ c a b̄ ā b c̄`` (bar = negated component)
followed by a purge-conjugated copy yields ``[[H_a, H_b], H_c]`` at δt³.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from .lattice import CodeLayout, GridLayout, build_code_terms, build_system_hamiltonian
from .magnus import effective_hamiltonian, magnus_exponent
from .pauli import (
    CliffordLayer,
    PhasedPauli,
    WeightedPauliSum,
    nested_commutator,
)
from .schedule import (
    Evolve,
    PauliRotation,
    PulseSchedule,
    ScheduleBuilder,
    clifford_frames,
    schedule_from_frames,
)

__all__ = [
    "COMPONENTS",
    "ComponentSpec",
    "CompileReport",
    "CertificationError",
    "gen_component",
    "commutator_sequence",
    "compile_plaquette",
    "compile_grid",
    "compile_pi4",
    "compile_boundary",
    "schedule_boundary",
    "compile_deformation",
    "compile_nn_vertex",
    "certify",
    "find_negator",
    "site_layer",
]


class CertificationError(ValueError):
    """A symbolic check on an emitted schedule failed."""


@dataclass(frozen=True)
class ComponentSpec:
    """Labels refer to the corners 1..4 of a square."""

    clifford: str
    mask: str
    negator: str
    steps: int = 2


COMPONENTS = {
    "a": ComponentSpec("W1 W2", "Z1 Z2", "X1 Z3"),
    "b": ComponentSpec("S1", "Z1 Z4", "X1 Z2"),
    "c": ComponentSpec("S2", "Z1 Z4", "Z1 Z2"),
    # Hadamard instead of the phase gate: 2(X1 X4 + Z2 X3), commutes with [H_a, H_b]
    "c_hole": ComponentSpec("W2", "Z1 Z4", "Z1 X2"),
    # 2(Z1 X2 + X3 X4): Hadamard on qubit 1 only, for the weight-3 boundary term
    "a3": ComponentSpec("W1", "Z1 Z2", "X1 Z3"),
}

# Nearest-neighbour variant: H_x = (X1 + X3)(X2 + X4), one step each
NN_COMPONENTS = {
    "a": ComponentSpec("S1 S2", "", "X2 Z4", steps=1),
    "b": ComponentSpec("W1 S2", "", "X2 Z4", steps=1),
    "c": ComponentSpec("W2", "", "X2 Z4", steps=1),
}

WORD = ("a", "b", "-a", "-b", "c", "a", "-b", "-a", "b", "-c")


@dataclass
class CompileReport:
    schedule: PulseSchedule
    step_count: int
    declared_target: WeightedPauliSum
    expected_residual_order: int
    certified: bool = False
    checks: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.schedule.total_duration and self.step_count != self.schedule.total_duration:
            raise ValueError("step count disagrees with the schedule duration")

    def summary(self) -> dict:
        return {
            "step_count": self.step_count,
            "declared_target": str(self.declared_target),
            "expected_residual_order": self.expected_residual_order,
            "certified": self.certified,
            "checks": self.checks,
            "notes": self.notes,
        }


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def site_layer(text: str, qubits: Sequence[int], n: int) -> CliffordLayer:
    """Layer written with corner labels 1..len(qubits), placed on ``qubits``."""
    if not text.strip():
        return CliffordLayer.identity(n)
    local = CliffordLayer.from_string(text, len(qubits))
    return CliffordLayer(n, {qubits[q]: g for q, g in local.gates.items()}, local.phase)


def _site_pauli(text: str, qubits: Sequence[int], n: int) -> PhasedPauli:
    local = PhasedPauli.from_string(text, len(qubits))
    x = sum(1 << qubits[q] for q in range(len(qubits)) if local.x >> q & 1)
    z = sum(1 << qubits[q] for q in range(len(qubits)) if local.z >> q & 1)
    return PhasedPauli(n, x, z)


def _combine(layers: Sequence[CliffordLayer], n: int) -> CliffordLayer:
    out = CliffordLayer.identity(n)
    for layer in layers:
        out = layer @ out
    return out


def _site_hamiltonian(grid: GridLayout, qubits: Sequence[int]) -> WeightedPauliSum:
    qs = set(qubits)
    edges = [(a, b) for a, b in grid.edges() if a in qs and b in qs]
    need = len(qubits) * (len(qubits) - 1) // 2 if grid.connectivity == "diagonal" else len(qubits)
    if len(edges) < need:
        raise ValueError(f"site {tuple(qubits)} is missing couplings ({len(edges)} of {need})")
    return WeightedPauliSum(grid.n, {((1 << a) | (1 << b), 0, 0, 0): 1 for a, b in edges})


def _component_frames(c: CliffordLayer, u: CliffordLayer, neg: CliffordLayer | None, inner: Sequence[CliffordLayer]):
    """Frames ``F · C† · N`` for each inner Pauli frame ``F`` (``N`` acts first)."""
    outer = c.inverse()
    if neg is not None:
        outer = outer @ neg
    return [f @ outer for f in inner]


def _two_step_inner(u: CliffordLayer) -> list[CliffordLayer]:
    return [CliffordLayer.identity(u.n), u]


def _evolve_items(frames, name="system"):
    return [(f, Evolve(name, 1)) for f in frames]


def _pauli_layer(p: PhasedPauli) -> CliffordLayer:
    return CliffordLayer.from_pauli(p.strip())


def find_negator(generator: WeightedPauliSum, max_weight: int = 2) -> CliffordLayer | None:
    """Lowest-weight Pauli on the generator's support anticommuting with every term."""
    support = generator.support()
    paulis = generator.paulis()
    n = generator.n
    for w in range(1, max_weight + 1):
        for qs in itertools.combinations(support, w):
            for letters in itertools.product("XYZ", repeat=w):
                x = sum(1 << q for q, l in zip(qs, letters) if l in "XY")
                z = sum(1 << q for q, l in zip(qs, letters) if l in "ZY")
                cand = PhasedPauli(n, x, z)
                if all(not cand.commutes(p) for p in paulis):
                    return CliffordLayer.from_pauli(cand)
    return None


def certify(s: PulseSchedule, max_dt_power: int = 3) -> tuple[bool, object]:
    """Exact comparison of the Magnus exponent with the declared target."""
    order = min(max_dt_power, 3) - 1
    rep = effective_hamiltonian(s, max_order=max(order, 0))
    target = s.declared_target if s.declared_target is not None else WeightedPauliSum.zero(s.n_qubits)
    got = rep.truncated(max_dt_power)
    ok = got == target if target.is_exact() and got.is_exact() else got.allclose(target, 1e-12)
    return ok, rep


# --------------------------------------------------------------------------
# components and the commutator word
# --------------------------------------------------------------------------


def _default_site(grid: GridLayout | None, site):
    grid = grid or GridLayout(2, 2)
    site = site if site is not None else (0, 0)
    if len(site) == 2:
        qubits = grid.square_qubits(*site)
    else:
        qubits = tuple(site)
    return grid, tuple(qubits)


def _parse_which(which: str) -> tuple[str, bool]:
    neg = which.startswith("neg_") or which.startswith("-")
    base = which.split("_", 1)[1] if which.startswith("neg_") else which.lstrip("-")
    return base, neg


def gen_component(which: str, site=None, grid: GridLayout | None = None, table: dict | None = None) -> PulseSchedule:
    """Two-step schedule whose exponent is one component Hamiltonian times δt.

    ``which`` is ``a``, ``b``, ``c``, ``c_hole`` or ``c_single``; prefix with
    ``neg_`` for the negated component.
    """
    grid, qubits = _default_site(grid, site)
    table = table or COMPONENTS
    base, neg = _parse_which(which)
    n = grid.n
    hx = _site_hamiltonian(grid, qubits)
    if base == "c_single":
        if neg:
            raise ValueError("c_single has no negated form")
        mask = site_layer("Z2", qubits, n)
        items = _evolve_items([CliffordLayer.identity(n), mask])
        y2 = WeightedPauliSum.from_pauli(_site_pauli("Y2", qubits, n))
        items.append((CliffordLayer.identity(n), PauliRotation(y2, 2, 1)))
        s = schedule_from_frames(n, {"system": hx}, items)
        target = (_site_sum("2 X1 X4 + 2 X3 X4 + 2 X1 X3 + 2 Y2", qubits, n)).shift(dt=1)
        return s.with_target(target, component=which)
    if base not in table:
        raise ValueError(f"unknown component {which!r}")
    spec = table[base]
    c = site_layer(spec.clifford, qubits, n)
    u = site_layer(spec.mask, qubits, n)
    nlayer = site_layer(spec.negator, qubits, n) if neg else None
    inner = _two_step_inner(u) if spec.steps == 2 else [CliffordLayer.identity(n)]
    items = _evolve_items(_component_frames(c, u, nlayer, inner))
    s = schedule_from_frames(n, {"system": hx}, items)
    target = _component_generator(hx, c, u, nlayer, inner)
    return s.with_target(target, component=which, negator=site_layer(spec.negator, qubits, n).to_json())


def _site_sum(text: str, qubits, n: int) -> WeightedPauliSum:
    local = WeightedPauliSum.parse(len(qubits), text)
    out = WeightedPauliSum.zero(n)
    for t in local:
        x = sum(1 << qubits[q] for q in range(len(qubits)) if t.pauli.x >> q & 1)
        z = sum(1 << qubits[q] for q in range(len(qubits)) if t.pauli.z >> q & 1)
        out = out + WeightedPauliSum.from_pauli(PhasedPauli(n, x, z), t.coeff, t.dt_power, t.lam_power)
    return out


def _component_generator(h, c, u, neg, inner) -> WeightedPauliSum:
    """Σ_F Q_F H Q_F† over the component's frames, graded at δt."""
    total = WeightedPauliSum.zero(h.n)
    for f in _component_frames(c, u, neg, inner):
        total = total + f.inverse().conjugate(h)
    return total.shift(dt=1)


def _negate_frames(items, neg: CliffordLayer):
    return [(f @ neg, ev) for f, ev in items]


def _word_items(parts: dict, word=WORD):
    items = []
    for w in word:
        items.extend(parts[w])
    return items


def _abstract_word(gens: dict, word=WORD) -> list[WeightedPauliSum]:
    return magnus_exponent([gens[w] for w in word], max_order=2)


def _purge_split(phi3: WeightedPauliSum, purge: PhasedPauli):
    keep = WeightedPauliSum.from_terms(phi3.n, [(t.pauli, t.coeff, t.dt_power, t.lam_power) for t in phi3 if t.pauli.commutes(purge)])
    return keep, phi3 - keep


def _certify_word(gens: dict, purge: PhasedPauli, checks: dict) -> WeightedPauliSum:
    """Component-level analysis: target, purge validity, nested-commutator form."""
    for k in ("a", "b", "c"):
        if gens["-" + k] != -gens[k]:
            raise CertificationError(f"negated component {k} is not the exact negative")
    phi1, phi2, phi3 = _abstract_word(gens)
    if not phi1.is_zero():
        raise CertificationError("component word does not cancel at first order")
    bad = [t for t in phi2 if t.pauli.commutes(purge)]
    if bad:
        raise CertificationError(f"purge pulse commutes with second-order terms {bad[:3]}")
    keep, extra = _purge_split(phi3, purge)
    target = keep * 2
    ga, gb, gc = gens["a"], gens["b"], gens["c"]
    nested, _ = _purge_split(nested_commutator(ga, gb, gc), purge)
    # informational: which raw nested terms the purge removes by itself
    for name, e in (("[[a,b],b]", nested_commutator(ga, gb, gb)), ("[[a,b],a]", nested_commutator(ga, gb, ga))):
        checks[f"purge_anticommutes_{name}"] = all(not t.pauli.commutes(purge) for t in e)
    ratio = None
    if not nested.is_zero():
        t0 = next(iter(nested))
        ratio = target.coeff(t0.pauli, t0.dt_power) / t0.coeff
        if target != nested * ratio:
            raise CertificationError("surviving third-order term is not proportional to [[a,b],c]")
    elif not target.is_zero():
        raise CertificationError("nested commutator vanishes but a third-order term survives")
    checks["first_order_cancels"] = True
    checks["purge_anticommutes_second_order"] = True
    checks["surviving_term_proportional_to_nested"] = True
    checks["target_over_nested_commutator"] = str(ratio) if ratio is not None else "0"
    return target


def commutator_sequence(a: PulseSchedule, b: PulseSchedule, c: PulseSchedule, purge, negators=None) -> PulseSchedule:
    """Word ``a b ā b̄ c a b̄ ā b c̄``, then a purge-conjugated repetition.

    Negators default to the ``negator`` stored in each component's metadata.
    The purge Pauli must commute with the target and anticommute with every
    discarded term; this is certified on the component generators before the
    schedule is emitted.
    """
    n = a.n_qubits
    if isinstance(purge, str):
        purge = PhasedPauli.from_string(purge, n)
    if isinstance(purge, CliffordLayer):
        purge = _layer_pauli(purge)
    comps = {"a": a, "b": b, "c": c}
    if negators is None:
        negators = [CliffordLayer.from_json(n, s.metadata["negator"]) for s in (a, b, c)]
    parts = {}
    gens = {}
    for (k, s), neg in zip(comps.items(), negators):
        if not s.cyclic:
            raise ValueError(f"component {k} is not cyclic")
        items = clifford_frames(s)
        parts[k] = items
        parts["-" + k] = _negate_frames(items, neg)
        gens[k] = effective_hamiltonian(s, max_order=0).exponent[0]
        gens["-" + k] = neg.conjugate(gens[k])
    checks: dict = {}
    target = _certify_word(gens, purge, checks)
    word = _word_items(parts)
    p_layer = _pauli_layer(purge)
    items = [(f @ p_layer.inverse(), ev) for f, ev in word] + word
    s = schedule_from_frames(n, a.hamiltonians, items, checks=checks, purge=str(purge))
    return s.with_target(target)


def _layer_pauli(layer: CliffordLayer) -> PhasedPauli:
    if not layer.is_pauli():
        raise ValueError("purge pulse must be a Pauli layer")
    out = PhasedPauli.identity(layer.n)
    for q, g in layer.gates.items():
        out = out * PhasedPauli.single(layer.n, q, g.name)
    return out.strip()


def _finish(s: PulseSchedule, residual_order: int, checks: dict | None = None, notes: dict | None = None,
            certify_up_to: int | None = None) -> CompileReport:
    checks = dict(checks or {})
    checks.update(s.metadata.get("checks", {}))
    ok, rep = certify(s, certify_up_to if certify_up_to is not None else min(residual_order - 1, 3))
    checks["magnus_matches_target"] = ok
    steps = s.step_count
    return CompileReport(s, steps, s.declared_target, residual_order, ok, checks, dict(notes or {}))


# --------------------------------------------------------------------------
# single plaquette and its variants
# --------------------------------------------------------------------------


def compile_plaquette(grid: GridLayout | None = None, site=None, purge: str = "Z1 Y2", vertex: bool = False) -> CompileReport:
    """40-step schedule with exponent ``64 δt³ X1 X2 X3 X4`` on the site.

    ``vertex`` conjugates the whole schedule by Hadamards on the site, giving
    the Z-type operator.
    """
    grid, qubits = _default_site(grid, site)
    if grid.connectivity != "diagonal":
        raise ValueError("the 40-step construction needs diagonal couplings; see compile_nn_vertex")
    comps = [gen_component(k, qubits, grid) for k in "abc"]
    s = commutator_sequence(*comps, purge=_site_pauli(purge, qubits, grid.n))
    if vertex:
        from .schedule import conjugate_schedule

        s = conjugate_schedule(s, site_layer("W1 W2 W3 W4", qubits, grid.n))
    notes = {"strength_ratio_per_step": "64 dt^3 / 40 dt = 1.6 dt^2"}
    return _finish(s, 4, notes=notes)


def compile_nn_vertex(grid: GridLayout | None = None, site=None, purge: str = "Z1 Y2") -> CompileReport:
    """20-step nearest-neighbour variant with exponent ``16 δt³ X1 X2 X3 X4``."""
    grid = grid or GridLayout(2, 2, connectivity="nearest")
    if grid.connectivity != "nearest":
        raise ValueError("compile_nn_vertex needs nearest-neighbour connectivity")
    grid, qubits = _default_site(grid, site)
    comps = [gen_component(k, qubits, grid, table=NN_COMPONENTS) for k in "abc"]
    s = commutator_sequence(*comps, purge=_site_pauli(purge, qubits, grid.n))
    return _finish(s, 4)


def compile_pi4(grid: GridLayout | None = None, site=None, theta: float = 0.0, coupling: float = 1.0,
                vertex: bool = False) -> CompileReport:
    """Exact ``exp(-iθ X1X2X3X4)`` (up to the global phase i) via π/4 conjugation.

    Time order: pulse ``Y1 W1``, evolve ``H_x`` for ``π/(4c)``, pulse ``Y1``,
    rotate about ``Y1`` by ``-θ``, evolve ``H_x`` for ``π/(4c)``, pulse ``W1``.
    """
    grid, qubits = _default_site(grid, site)
    n = grid.n
    hx = _site_hamiltonian(grid, qubits)
    if coupling != 1:
        hx = hx * coupling
    paulis = hx.paulis()
    if any(not p.commutes(q) for p in paulis for q in paulis):
        raise ValueError("site couplings must commute for the π/4 method")
    quarter = math.pi / (4 * coupling)
    y1 = WeightedPauliSum.from_pauli(_site_pauli("Y1", qubits, n))
    b = ScheduleBuilder(n, {"system": hx})
    b.pulse(site_layer("Y1 W1", qubits, n))
    b.evolve("system", quarter, absolute=True)
    b.pulse(site_layer("Y1", qubits, n))
    b.rotate(y1, -theta, 0)
    b.evolve("system", quarter, absolute=True)
    b.pulse(site_layer("W1", qubits, n))
    xxxx = WeightedPauliSum.from_pauli(_site_pauli("X1 X2 X3 X4", qubits, n), theta)
    s = b.build(xxxx, exact=True, global_phase="i", theta=theta)
    if vertex:
        from .schedule import conjugate_schedule

        s = conjugate_schedule(s, site_layer("W1 W2 W3 W4", qubits, n))
    return _finish(s, 0, certify_up_to=0)


# --------------------------------------------------------------------------
# full grid
# --------------------------------------------------------------------------

PARITY_CLASSES = ((0, 0), (1, 1), (0, 1), (1, 0))
_PATTERN_LABELS = {"a": (0, 1), "b": (0, 3), "c": (0, 3), "c_hole": (0, 3)}


def _mask_csp(grid: GridLayout, squares: Sequence[tuple[int, int]], labels: tuple[int, ...]) -> tuple[set, set]:
    """Z masks ``(m1, u)`` isolating the chosen pair couplings of each active square.

    Every qubit gets a two-bit colour ``(m1, u)``.  On active squares ``u`` marks
    the corner labels of the pattern and ``m1`` is constant per square; other
    qubits are free.  A coupling survives the four-frame average exactly when
    its endpoints share a colour, so every coupling that is not inside an
    active square must join different colours.
    """
    block_of: dict[int, int] = {}
    fixed_u: dict[int, int] = {}
    for b, sq in enumerate(squares):
        qs = grid.square_qubits(*sq)
        for i, q in enumerate(qs):
            block_of[q] = b
            fixed_u[q] = 1 if i in labels else 0
    nbrs: dict[int, list[int]] = {q: [] for q in range(grid.n)}
    for p, q in grid.edges():
        if p in block_of and q in block_of and block_of[p] == block_of[q]:
            continue
        nbrs[p].append(q)
        nbrs[q].append(p)
    # units: one per active square (m1 bit), one per free qubit (two bits)
    units = []
    seen = set()
    for q in range(grid.n):
        if q in block_of:
            b = block_of[q]
            if b not in seen:
                seen.add(b)
                units.append(("block", b, [x for x in block_of if block_of[x] == b]))
        else:
            units.append(("free", q, [q]))
    colour: dict[int, tuple[int, int]] = {}

    def options(unit):
        kind, _, qs = unit
        if kind == "block":
            return [{q: (m, fixed_u[q]) for q in qs} for m in (0, 1)]
        return [{qs[0]: (m, v)} for m in (0, 1) for v in (0, 1)]

    def consistent(assign):
        for q, col in assign.items():
            for r in nbrs[q]:
                if colour.get(r) == col or assign.get(r) == col and r != q:
                    return False
        return True

    def solve(i):
        if i == len(units):
            return True
        for assign in options(units[i]):
            if consistent(assign):
                colour.update(assign)
                if solve(i + 1):
                    return True
                for q in assign:
                    del colour[q]
        return False

    if not solve(0):
        raise ValueError("no decoupling mask exists for this parity class")
    m1 = {q for q, (m, _) in colour.items() if m}
    u = {q for q, (_, v) in colour.items() if v}
    return m1, u


def _z_layer(n: int, qubits) -> CliffordLayer:
    return CliffordLayer(n, {q: "Z" for q in qubits})


def _class_word(grid: GridLayout, hx: WeightedPauliSum, squares, holes: set, purge: str):
    """Frame items, component generators and certified target for one parity class."""
    n = grid.n
    parts: dict = {}
    gens: dict = {}
    masks: dict = {}
    for k in ("a", "b", "c"):
        names = {sq: ("c_hole" if (k == "c" and sq in holes) else k) for sq in squares}
        c = _combine([site_layer(COMPONENTS[names[sq]].clifford, grid.square_qubits(*sq), n) for sq in squares], n)
        neg = _combine([site_layer(COMPONENTS[names[sq]].negator, grid.square_qubits(*sq), n) for sq in squares], n)
        m1, u = _mask_csp(grid, squares, _PATTERN_LABELS[k])
        masks[k] = {"m1": sorted(q + 1 for q in m1), "u": sorted(q + 1 for q in u)}
        mz, uz = _z_layer(n, m1), _z_layer(n, u)
        inner = [CliffordLayer.identity(n), mz, uz, uz @ mz]
        items = _evolve_items(_component_frames(c, uz, None, inner))
        parts[k] = items
        parts["-" + k] = _negate_frames(items, neg)
        g = _component_generator(hx, c, uz, None, inner)
        expect = WeightedPauliSum.zero(n)
        for sq in squares:
            qs = grid.square_qubits(*sq)
            spec = COMPONENTS[names[sq]]
            local = _component_generator(_site_hamiltonian(grid, qs), site_layer(spec.clifford, qs, n),
                                         site_layer(spec.mask, qs, n), None,
                                         _two_step_inner(site_layer(spec.mask, qs, n)))
            expect = expect + local * 2
        if g != expect:
            raise CertificationError(f"mask for component {k} leaves couplings between squares")
        gens[k] = g
        gens["-" + k] = neg.conjugate(g)
    purge_p = PhasedPauli.identity(n)
    for sq in squares:
        purge_p = purge_p * _site_pauli(purge, grid.square_qubits(*sq), n)
    purge_p = purge_p.strip()
    checks: dict = {}
    target = _certify_word(gens, purge_p, checks)
    word = _word_items(parts)
    p_layer = _pauli_layer(purge_p)
    items = [(f @ p_layer.inverse(), ev) for f, ev in word] + word
    return items, target, checks, masks


def compile_grid(code: CodeLayout | GridLayout | None = None, purge: str = "Z1 Y2",
                 reference_constant: int = 2 ** 9) -> CompileReport:
    """320-step schedule whose δt³ exponent is a single constant times ``Σ A_v + Σ B_p``.

    Squares are processed in four parity classes; inside a class the squares
    are disjoint and run the single-plaquette word in parallel, each component
    stretched to four steps so that Z masks switch off every coupling that
    leaves a square.  Z-type classes are conjugated by Hadamards on all qubits.
    Hole squares run the hole component so their third-order term vanishes.
    """
    if code is None:
        code = build_code_terms(GridLayout(4, 4))
    elif isinstance(code, GridLayout):
        code = build_code_terms(code)
    grid = code.grid
    if grid.connectivity != "diagonal":
        raise ValueError("grid compilation needs diagonal couplings")
    if grid.periodic:
        raise ValueError("periodic grids are not supported by the mask construction")
    if grid.rows < 3 or grid.cols < 3:
        raise ValueError("grid too small: every parity class needs at least one square")
    n = grid.n
    hx = build_system_hamiltonian(grid)
    holes = code.hole_squares
    enabled = set(code.bulk_squares()) | holes
    hadamard_all = CliffordLayer.on(n, range(n), "W")
    items: list = []
    target = WeightedPauliSum.zero(n)
    checks: dict = {}
    masks: dict = {}
    for cls in PARITY_CLASSES:
        squares = [sq for sq in grid.squares() if (sq[0] % 2, sq[1] % 2) == cls and sq in enabled]
        if not squares:
            raise ValueError(f"grid too small: parity class {cls} has no square")
        cls_items, cls_target, cls_checks, cls_masks = _class_word(grid, hx, squares, holes, purge)
        if GridLayout.square_type(*cls) == "Z":
            cls_items = [(f @ hadamard_all.inverse(), ev) for f, ev in cls_items]
            cls_target = hadamard_all.conjugate(cls_target)
        items += cls_items
        target = target + cls_target
        checks[f"class_{cls[0]}{cls[1]}"] = cls_checks
        masks[f"class_{cls[0]}{cls[1]}"] = cls_masks
    s = schedule_from_frames(n, {"system": hx}, items)
    bulk = code.bulk_sum()
    constant = None
    if not target.is_zero():
        t0 = next(iter(target))
        constant = t0.coeff
        uniform = target == bulk.shift(dt=3) * constant
    else:
        uniform = bulk.is_zero()
    s = s.with_target(target, grid_constant=str(constant), reference_constant=reference_constant)
    report = _finish(s, 4, checks={"uniform_coefficients": uniform, "classes": checks})
    report.notes.update(
        {
            "grid_constant": str(constant),
            "reference_constant": reference_constant,
            "matches_reference": constant == reference_constant,
            "masks": masks,
            "boundary_terms": "not generated here; see compile_boundary",
        }
    )
    if not uniform:
        report.certified = False
    return report


# --------------------------------------------------------------------------
# boundaries, holes and lower-weight terms
# --------------------------------------------------------------------------


def _single_body_component(qubits, grid: GridLayout, neg: bool) -> PulseSchedule:
    """``4(X3 X4 + Y2) δt``: masks Z1 and Z2 isolate X3 X4, a Y2 rotation adds the field."""
    n = grid.n
    hx = _site_hamiltonian(grid, qubits)
    z1, z2 = site_layer("Z1", qubits, n), site_layer("Z2", qubits, n)
    nlayer = site_layer("Z2 Z3", qubits, n)
    frames = [CliffordLayer.identity(n), z1, z2, z1 @ z2]
    y2 = WeightedPauliSum.from_pauli(_site_pauli("Y2", qubits, n))
    items = [(CliffordLayer.identity(n), PauliRotation(y2, 4, 1))] + _evolve_items(frames)
    if neg:
        items = _negate_frames(items, nlayer)
    s = schedule_from_frames(n, {"system": hx}, items)
    return s.with_target(None, component="c_single4", negator=nlayer.to_json())


def _short_word(a: PulseSchedule, b: PulseSchedule, wrap: PhasedPauli) -> tuple[PulseSchedule, WeightedPauliSum, dict]:
    """Group commutator ``a b ā b̄`` and a copy conjugated by ``wrap``."""
    n = a.n_qubits
    parts, gens = {}, {}
    for k, s in (("a", a), ("b", b)):
        neg = CliffordLayer.from_json(n, s.metadata["negator"])
        parts[k] = clifford_frames(s)
        parts["-" + k] = _negate_frames(parts[k], neg)
        gens[k] = effective_hamiltonian(s, max_order=0).exponent[0]
        gens["-" + k] = neg.conjugate(gens[k])
        if gens["-" + k] != -gens[k]:
            raise CertificationError(f"negated component {k} is not the exact negative")
    word = ("a", "b", "-a", "-b")
    phi1, phi2, phi3 = _abstract_word(gens, word)
    if any(t.pauli.commutes(wrap) for t in phi3):
        raise CertificationError("wrap pulse does not remove the third-order terms")
    if any(not t.pauli.commutes(wrap) for t in phi2):
        raise CertificationError("wrap pulse does not commute with the second-order target")
    items = _word_items(parts, word)
    wl = _pauli_layer(wrap)
    items = items + [(f @ wl.inverse(), ev) for f, ev in items]
    checks = {"wrap_commutes_target": True, "wrap_kills_third_order": True}
    return schedule_from_frames(n, a.hamiltonians, items), phi2 * 2, checks


def compile_boundary(kind: str, site=None, grid: GridLayout | None = None, purge: str = "Z1 Y2") -> CompileReport:
    """Hole, three-body and single-body constructions on one square.

    * ``hole``: the c component uses a Hadamard instead of the phase gate, so
      ``[[H_a, H_b], H_c']`` vanishes and the third-order exponent is zero.
    * ``three_body``: the group commutator of ``2(Z1X2 + X3X4)`` and ``H_b``
      gives ``16 δt² X1 X2 X4``; an X1-conjugated repetition cancels δt³.
    * ``single_body``: ``H_c`` is replaced by ``4(X3 X4 + Y2)``, which turns the
      nested commutator into a pure ``X1 X2 X4`` term at δt³.
    """
    grid, qubits = _default_site(grid, site)
    n = grid.n
    if kind == "hole":
        comps = [gen_component(k, qubits, grid) for k in ("a", "b", "c_hole")]
        s = commutator_sequence(*comps, purge=_site_pauli(purge, qubits, n))
        return _finish(s, 4, notes={"kind": kind})
    if kind == "three_body":
        a = gen_component("a3", qubits, grid)
        b = gen_component("b", qubits, grid)
        s, target, checks = _short_word(a, b, _site_pauli("X1", qubits, n))
        s = s.with_target(target, kind=kind)
        return _finish(s, 4, checks=checks, notes={"kind": kind})
    if kind == "single_body":
        comps = [gen_component("a", qubits, grid), gen_component("b", qubits, grid), _single_body_component(qubits, grid, False)]
        s = commutator_sequence(*comps, purge=_site_pauli(purge, qubits, n))
        return _finish(s, 4, notes={"kind": kind})
    raise ValueError(f"unknown boundary kind {kind!r}")


def _rename_hamiltonians(s: PulseSchedule, prefix: str) -> PulseSchedule:
    names = {k: f"{prefix}{k}" for k in s.hamiltonians}
    events = tuple(Evolve(names[e.hamiltonian], e.duration, e.absolute) if isinstance(e, Evolve) else e for e in s.events)
    hams = {names[k]: h for k, h in s.hamiltonians.items()}
    return PulseSchedule(s.n_qubits, events, hams, s.declared_target, s.cyclic, dict(s.metadata))


def schedule_boundary(bulk: PulseSchedule, boundary: PulseSchedule, dt_value: float | None = None,
                      period: int | None = None) -> PulseSchedule:
    """Run ``period`` bulk cycles, then one boundary cycle.

    Boundary terms arrive at ``δt²`` while bulk terms arrive at ``δt³``; giving
    the boundary one slot in ``period = ⌈1/δt⌉`` brings both to the same
    strength per unit time.  The declared target is ``period·Ω_bulk + Ω_bd``,
    exact up to cross terms of order ``δt⁵``.
    """
    if bulk.n_qubits != boundary.n_qubits:
        raise ValueError("bulk and boundary schedules act on different registers")
    if period is None:
        if dt_value is None or not 0 < dt_value < 1:
            raise ValueError("give period or a step size 0 < dt < 1")
        period = math.ceil(1 / dt_value)
    if period < 1:
        raise ValueError("period must be a positive integer")
    bd = _rename_hamiltonians(boundary, "boundary:")
    hams = dict(bulk.hamiltonians)
    hams.update(bd.hamiltonians)
    target = None
    if bulk.declared_target is not None and boundary.declared_target is not None:
        target = bulk.declared_target * period + boundary.declared_target
    meta = {"period": period, "duty_cycle": f"1/{period + 1}",
            "bulk_steps": bulk.step_count, "boundary_steps": boundary.step_count}
    return PulseSchedule(bulk.n_qubits, bulk.events * period + bd.events, hams, target,
                         bulk.cyclic and boundary.cyclic, meta)


# --------------------------------------------------------------------------
# Trotterized code deformation
# --------------------------------------------------------------------------


def _deformation_terms(code: CodeLayout, site_b2, x_qubit: int):
    n = code.n
    b2 = None
    rest, verts = [], []
    for st in code.stabilizers:
        p = st.pauli(n)
        if st.kind == "Z" and st.square == tuple(site_b2) and not st.boundary:
            b2 = p
        elif st.kind == "Z":
            rest.append(p)
        else:
            verts.append(p)
    if b2 is None:
        raise ValueError(f"no Z-type stabilizer on square {site_b2}")
    x1 = PhasedPauli.single(n, x_qubit, "X")
    s = code.coupling_sign
    terms = {
        "B2": WeightedPauliSum.from_pauli(b2, s),
        "B_rest": WeightedPauliSum.from_terms(n, [(p, s) for p in rest]),
        "X1": WeightedPauliSum.from_pauli(x1, s),
        "A": WeightedPauliSum.from_terms(n, [(p, s) for p in verts]),
    }
    clashes = [str(p) for p in rest + verts if not p.commutes(x1)]
    return terms, clashes


def deformation_hamiltonian(code: CodeLayout, site_b2, x_qubit: int, J: float = 1.0, t1: float = 1.0):
    """``t -> H(t)`` interpolating ``B2`` into ``X1`` over ``[0, t1]``, as Pauli sums."""
    terms, _ = _deformation_terms(code, site_b2, x_qubit)

    def h(t: float) -> WeightedPauliSum:
        s = t / t1
        return (terms["B2"] * (1 - s) + terms["X1"] * s + terms["B_rest"] + terms["A"]) * J

    return h


def compile_deformation(code: CodeLayout, site_b2, x_qubit: int, n_tr: int, J: float = 1.0, t1: float = 1.0,
                        order: int = 1, h: float | None = None, dt: float | None = None) -> PulseSchedule:
    """Product of ideal building-block rotations approximating the deformation.

    ``order=1`` is the literal product over ``m = 0..N`` with block exponents
    ``(N-m, N, m, N)`` for ``(B2, ΣB_rest, X1, ΣA)`` in units of ``JΔt/N``.
    ``order=2`` is the midpoint-symmetric variant over ``m = 0..N-1`` in units
    of ``JΔt/(4N)``: ``B2^(2N-2m-1) B_rest^(2N) X1^(4m+2) A^(4N)`` followed by
    the same B factors again.  Each block is a ``PauliRotation`` standing in for
    the corresponding compiled plaquette schedule.
    """
    if n_tr < 1:
        raise ValueError("n_tr must be positive")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    terms, clashes = _deformation_terms(code, site_b2, x_qubit)
    big_dt = t1 / n_tr
    unit = J * big_dt / n_tr if order == 1 else J * big_dt / (4 * n_tr)
    if h is not None and dt is not None and not math.isclose(J * big_dt / n_tr, h * dt ** 3, rel_tol=1e-9):
        raise ValueError("incompatible binding: J Δt / N_tr must equal h δt³")
    b = ScheduleBuilder(code.n)
    exponents = []

    def block(name, k):
        if k and not terms[name].is_zero():
            b.rotate(terms[name], k * unit, 0)

    if order == 1:
        for m in range(n_tr + 1):
            ex = {"A": n_tr, "X1": m, "B_rest": n_tr, "B2": n_tr - m}
            for name in ("A", "X1", "B_rest", "B2"):
                block(name, ex[name])
            exponents.append(ex)
    else:
        for m in range(n_tr):
            half = 2 * n_tr - 2 * m - 1
            ex = {"B2": half, "B_rest": 2 * n_tr, "X1": 4 * m + 2, "A": 4 * n_tr}
            block("B2", half)
            block("B_rest", 2 * n_tr)
            block("X1", 4 * m + 2)
            block("A", 4 * n_tr)
            block("B2", half)
            block("B_rest", 2 * n_tr)
            exponents.append(ex)
    return b.build(
        None,
        n_tr=n_tr,
        order=order,
        unit_angle=unit,
        J=J,
        t1=t1,
        exponents=exponents,
        noncommuting_with_x1=clashes,
    )
