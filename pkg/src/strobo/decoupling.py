"""Dynamical-decoupling sequences and their interleaving with simulations.

A sequence is stored by its frames ``g_1 .. g_N``: one cycle implements
``Π_k g_k exp(-i H δt) g_k†``, so the toggled Hamiltonians are ``g_k† H g_k``.
The physical pulses are the frame differences ``g_{k} g_{k-1}†``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .pauli import CliffordLayer, PhasedPauli, WeightedPauliSum, _gf2_nullspace, normalizer
from .schedule import Evolve, PauliRotation, PulseSchedule, clifford_frames, schedule_from_frames

__all__ = [
    "DDSequence",
    "universal_sequence",
    "lambda1_extension",
    "symmetrize_protecting",
    "symmetrize_local",
    "interleave",
    "lower_bound_check",
    "twirl",
    "window_supports",
    "window_errors",
    "LOCAL_PATTERN_CAP",
]

LOCAL_PATTERN_CAP = 16  # l^D sites in the base hypercube
UNCONSTRAINED_PULSE_CAP = 4 ** 8


@dataclass(frozen=True)
class DDSequence:
    frames: tuple
    n_qubits: int
    protected_group: tuple | None = None
    name: str = ""
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        for g in self.frames:
            if g.n != self.n_qubits:
                raise ValueError("frame acts on the wrong register")
        if self.protected_group:
            bad = [str(p) for p in self.protected_group for g in self.frames
                   if not _commutes_with_layer(g, p)]
            if bad:
                raise ValueError(f"frames do not commute with protected generators {bad[:3]}")

    @property
    def n_segments(self) -> int:
        return len(self.frames)

    @property
    def cyclic(self) -> bool:
        return True

    @property
    def pulses(self) -> list[CliffordLayer]:
        """Pulse before each segment, then the closing pulse."""
        out = []
        prev = CliffordLayer.identity(self.n_qubits)
        for g in self.frames:
            out.append(g @ prev.inverse())
            prev = g
        out.append(prev.inverse())
        return out

    def embed(self, n_total: int) -> "DDSequence":
        """Same pulses on a larger register (extra qubits, e.g. a bath, untouched)."""
        prot = None if self.protected_group is None else tuple(p.embed(n_total) for p in self.protected_group)
        return DDSequence(tuple(g.embed(n_total) for g in self.frames), n_total, prot, self.name, dict(self.metadata))

    def commutes_with(self, h: WeightedPauliSum) -> bool:
        return all(g.conjugate(h) == h for g in self.frames)

    def average(self, h: WeightedPauliSum) -> WeightedPauliSum:
        """``Σ_k g_k† h g_k``."""
        total = WeightedPauliSum.zero(h.n)
        for g in self.frames:
            total = total + g.inverse().conjugate(h)
        return total

    def to_schedule(self, hamiltonians: dict, name: str = "system") -> PulseSchedule:
        items = [(g, Evolve(name, 1)) for g in self.frames]
        return schedule_from_frames(self.n_qubits, hamiltonians, items, dd=self.name)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "n_qubits": self.n_qubits,
            "n_segments": self.n_segments,
            "frames": [g.to_json() for g in self.frames],
            "pulses": [p.to_json() for p in self.pulses],
            "protected_group": None if self.protected_group is None else [str(p) for p in self.protected_group],
            "metadata": self.metadata,
        }


def _commutes_with_layer(g: CliffordLayer, p: PhasedPauli) -> bool:
    img = g.conjugate_pauli(p)
    return img.x == p.x and img.z == p.z and img.phase == p.phase


def _global(n: int, letter: str) -> CliffordLayer:
    return CliffordLayer.on(n, range(n), letter)


def universal_sequence(n_qubits: int) -> DDSequence:
    """Symmetric eight-segment sequence with frames ``I X Y Z Z Y X I`` on all qubits.

    The inter-pulse layers are ``X, Z, X, I, X, Z, X`` (up to phases).
    """
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    n = n_qubits
    letters = "IXYZZYXI"
    frames = [CliffordLayer.identity(n) if l == "I" else _global(n, l) for l in letters]
    return DDSequence(tuple(frames), n, name="universal")


def lambda1_extension(seq: DDSequence) -> DDSequence:
    """The cycle followed by its copy conjugated by ``X`` on every qubit."""
    x = _global(seq.n_qubits, "X")
    frames = seq.frames + tuple(g @ x for g in seq.frames)
    return DDSequence(frames, seq.n_qubits, seq.protected_group, f"{seq.name}+x", dict(seq.metadata))


def symmetrize_protecting(generators: Sequence, n_qubits: int | None = None) -> DDSequence:
    """Pulse set equal to the normalizer of the group generated by ``generators``.

    Twirling over the normalizer fixes every element of the group and sends
    every other Pauli to zero.
    """
    gens = [PhasedPauli.from_string(g, n_qubits) if isinstance(g, str) else g for g in generators]
    if n_qubits is None:
        if not gens:
            raise ValueError("n_qubits is required when no generators are given")
        n_qubits = max(g.n for g in gens)
    gens = [g if g.n == n_qubits else g.embed(n_qubits) for g in gens]
    elems = normalizer(gens, n_qubits)
    frames = tuple(CliffordLayer.from_pauli(p) for p in elems)
    return DDSequence(frames, n_qubits, tuple(gens), "normalizer")


def _cell_masks(l: int, dims: tuple[int, ...]) -> list[int]:
    """Qubit mask of every cell of the base block under periodic extension."""
    masks = [0] * (l ** len(dims))
    for q, coords in enumerate(itertools.product(*[range(d) for d in dims])):
        idx = 0
        for c in coords:
            idx = idx * l + c % l
        masks[idx] |= 1 << q
    return masks


def _pattern_layer(pattern: Sequence[str], masks: list[int], n: int) -> CliffordLayer:
    gates = {}
    for letter, m in zip(pattern, masks):
        if letter == "I":
            continue
        q = 0
        while m:
            if m & 1:
                gates[q] = letter
            m >>= 1
            q += 1
    return CliffordLayer(n, gates)


def _commuting_patterns(masks: list[int], terms: list[PhasedPauli]) -> list[tuple[str, ...]]:
    """Patterns whose extension commutes with every term: a GF(2) nullspace."""
    cells = len(masks)
    rows = []
    for t in terms:
        r = 0
        for c, m in enumerate(masks):
            if bin(m & t.z).count("1") & 1:
                r |= 1 << (2 * c)  # x bit of cell c
            if bin(m & t.x).count("1") & 1:
                r |= 1 << (2 * c + 1)  # z bit of cell c
        rows.append(r)
    basis = _gf2_nullspace(rows, 2 * cells)
    out = []
    for bits in itertools.product((0, 1), repeat=len(basis)):
        v = 0
        for use, b in zip(bits, basis):
            if use:
                v ^= b
        out.append(tuple("IXZY"[(v >> (2 * c) & 1) | (v >> (2 * c + 1) & 1) << 1] for c in range(cells)))
    return sorted(out, key=lambda p: ["IXYZ".index(x) for x in p])


def symmetrize_local(l: int, D: int, lattice_dims: Sequence[int], commuting_with: WeightedPauliSum | None = None) -> DDSequence:
    """Periodic extensions of every Pauli pattern on an ``l^D`` block.

    With ``commuting_with`` set, only patterns whose extension commutes with
    every term of that Hamiltonian are kept.  Patterns are listed in
    lexicographic order of their letters (I < X < Y < Z).
    """
    dims = tuple(int(d) for d in lattice_dims)
    if l < 1 or D < 1 or len(dims) != D:
        raise ValueError("need l >= 1 and one lattice dimension per axis")
    if any(d < l for d in dims):
        raise ValueError("lattice dimensions must be at least l")
    cells = l ** D
    if cells > LOCAL_PATTERN_CAP:
        raise ValueError(f"l^D = {cells} exceeds the cap of {LOCAL_PATTERN_CAP}")
    n = math.prod(dims)
    masks = _cell_masks(l, dims)
    if commuting_with is not None:
        patterns = _commuting_patterns(masks, commuting_with.paulis())
    else:
        if 4 ** cells > UNCONSTRAINED_PULSE_CAP:
            raise ValueError(f"4^{cells} pulses exceed the cap of {UNCONSTRAINED_PULSE_CAP}; pass commuting_with")
        patterns = list(itertools.product("IXYZ", repeat=cells))
    frames = tuple(_pattern_layer(p, masks, n) for p in patterns)
    return DDSequence(frames, n, name=f"local_l{l}_D{D}", metadata={"l": l, "D": D, "dims": list(dims)})


def window_supports(l: int, dims: Sequence[int]) -> list[tuple[int, ...]]:
    """Qubit sets of every axis-aligned ``l^D`` window of an open lattice (row-major indices)."""
    dims = tuple(int(d) for d in dims)
    out = []
    for corner in itertools.product(*[range(d - l + 1) for d in dims]):
        cells = []
        for off in itertools.product(range(l), repeat=len(dims)):
            idx = 0
            for c, o, d in zip(corner, off, dims):
                idx = idx * d + c + o
            cells.append(idx)
        out.append(tuple(sorted(cells)))
    return out


def window_errors(l: int, dims: Sequence[int]) -> list[PhasedPauli]:
    """Distinct nontrivial Paulis supported inside some ``l^D`` window."""
    n = math.prod(int(d) for d in dims)
    seen = set()
    for support in window_supports(l, dims):
        for letters in itertools.product("IXYZ", repeat=len(support)):
            x = z = 0
            for q, a in zip(support, letters):
                if a in "XY":
                    x |= 1 << q
                if a in "YZ":
                    z |= 1 << q
            if x | z:
                seen.add((x, z))
    return [PhasedPauli(n, x, z) for x, z in sorted(seen)]


def twirl(frames: Iterable[CliffordLayer], p: PhasedPauli) -> WeightedPauliSum:
    """``Σ_g g p g†`` as an exact Pauli sum."""
    total = WeightedPauliSum.zero(p.n)
    base = WeightedPauliSum.from_pauli(p)
    for g in frames:
        total = total + g.conjugate(base)
    return total


def interleave(dd: DDSequence, sim: PulseSchedule) -> PulseSchedule:
    """Run a full DD cycle inside every simulation step.

    Each ``Evolve`` of duration ``d`` becomes ``N_DD`` sub-evolutions of
    duration ``d`` in frames ``g_k``; simulation pulses sit at cycle
    boundaries and are fused with the neighbouring DD pulses.  One simulation
    step therefore lasts ``N_DD δt``, so a rotation ``exp(-i θ δt^p A)`` gets
    angle ``θ N_DD^p`` and the declared target's ``δt^k`` part gains ``N_DD^k``.
    """
    if dd.n_qubits != sim.n_qubits:
        raise ValueError("DD sequence and schedule act on different registers")
    for name, h in sim.hamiltonians.items():
        if not dd.commutes_with(h.graded(lam_power=0)):
            raise ValueError(f"DD frames do not commute with the λ⁰ part of {name!r}")
    nd = dd.n_segments
    items = []
    for q, ev in clifford_frames(sim):
        if isinstance(ev, Evolve):
            dur = ev.duration if not ev.absolute else ev.duration / nd
            for g in dd.frames:
                items.append((g @ q, Evolve(ev.hamiltonian, dur, ev.absolute)))
        else:
            items.append((q, PauliRotation(ev.axis, ev.angle * nd ** ev.dt_power, ev.dt_power)))
    target = None
    if sim.declared_target is not None:
        target = WeightedPauliSum.zero(sim.n_qubits)
        for a in sorted({g[0] for g in sim.declared_target.grades()}):
            target = target + sim.declared_target.graded(a) * (Fraction(nd) ** a)
    meta = dict(sim.metadata)
    meta.update({"dd": dd.name, "n_dd": nd})
    out = schedule_from_frames(sim.n_qubits, sim.hamiltonians, items, **meta)
    return out.with_target(target)


def lower_bound_check(n_qubits: int, pulses: Sequence) -> dict:
    """Commutation signatures of ``Y_i`` against Pauli pulses.

    Two qubits with equal signatures give a ``Y_i Y_j`` error that commutes
    with every pulse and so survives any averaging.  With ``2^|P| < N`` a
    collision is forced.
    """
    layers = [p if isinstance(p, PhasedPauli) else _as_pauli(p, n_qubits) for p in pulses]
    sigs = []
    for i in range(n_qubits):
        y = PhasedPauli.single(n_qubits, i, "Y")
        sigs.append(tuple(int(not y.commutes(p)) for p in layers))
    first: dict = {}
    collision = None
    for i, s in enumerate(sigs):
        if s in first:
            collision = (first[s], i)
            break
        first[s] = i
    forced = 2 ** len(layers) < n_qubits
    return {
        "n_qubits": n_qubits,
        "n_pulses": len(layers),
        "signatures": ["".join(map(str, s)) for s in sigs],
        "collision": collision,
        "forced": forced,
        "invariant_error": None if collision is None else f"Y{collision[0] + 1} Y{collision[1] + 1}",
    }


def _as_pauli(p, n: int) -> PhasedPauli:
    if isinstance(p, str):
        return PhasedPauli.from_string(p, n)
    if isinstance(p, CliffordLayer):
        if not p.is_pauli():
            raise ValueError("lower-bound analysis needs Pauli pulses")
        out = PhasedPauli.identity(n)
        for q, g in p.gates.items():
            out = out * PhasedPauli.single(n, q, g.name)
        return out.strip()
    raise TypeError(f"cannot interpret {p!r} as a Pauli pulse")


def random_pauli_pulses(n_qubits: int, count: int, rng: np.random.Generator) -> list[PhasedPauli]:
    """Uniformly random Pauli strings (used by the lower-bound experiments)."""
    out = []
    for _ in range(count):
        x = int(rng.integers(0, 2 ** n_qubits))
        z = int(rng.integers(0, 2 ** n_qubits))
        out.append(PhasedPauli(n_qubits, x, z))
    return out
