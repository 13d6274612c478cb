"""Pulse-schedule IR and its exact toggling-frame transformation.

A schedule is a time-ordered list of events:

* ``Pulse``: an instantaneous Clifford layer or exact Pauli exponential,
* ``PauliRotation``: ``exp(-i angle δt^p axis)``, a pseudo-evolution that is
  treated as one more piecewise-constant segment,
* ``Evolve``: evolution under a named Hamiltonian for ``duration`` units of
  δt (or for an absolute time when ``absolute`` is set).

Durations stay symbolic in δt so one schedule serves a whole δt sweep.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from .pauli import CliffordLayer, PauliExponential, PhasedPauli, WeightedPauliSum

__all__ = [
    "Pulse",
    "PauliRotation",
    "Evolve",
    "PulseSchedule",
    "ScheduleBuilder",
    "Segment",
    "Frame",
    "TogglingFrame",
    "InexactPulseError",
    "conjugate_schedule",
    "symmetrize",
    "toggling_frame",
    "schedule_from_frames",
    "clifford_frames",
]


class InexactPulseError(ValueError):
    """A pulse angle is not a multiple of π/4; only the dense path applies."""


def _num(v):
    if isinstance(v, (Fraction, float)):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    return float(v)


def _num_json(v):
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else str(v)
    return float(v)


@dataclass(frozen=True)
class Pulse:
    op: CliffordLayer | PauliExponential
    duration = 0


@dataclass(frozen=True)
class PauliRotation:
    axis: WeightedPauliSum
    angle: Fraction | float
    dt_power: int = 0
    duration = 0

    def __post_init__(self):
        object.__setattr__(self, "angle", _num(self.angle))
        paulis = self.axis.paulis()
        for i, p in enumerate(paulis):
            for q in paulis[i + 1:]:
                if not p.commutes(q):
                    raise ValueError("rotation axis terms must commute")


@dataclass(frozen=True)
class Evolve:
    hamiltonian: str = "system"
    duration: Fraction | float = Fraction(1)
    absolute: bool = False

    def __post_init__(self):
        object.__setattr__(self, "duration", _num(self.duration))
        if not self.duration > 0:
            raise ValueError("evolution durations must be positive")


Event = Pulse | PauliRotation | Evolve


@dataclass(frozen=True)
class PulseSchedule:
    n_qubits: int
    events: tuple
    hamiltonians: dict
    declared_target: WeightedPauliSum | None = None
    cyclic: bool = True
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        for name, h in self.hamiltonians.items():
            if h.n != self.n_qubits:
                raise ValueError(f"Hamiltonian {name!r} acts on {h.n} qubits, schedule has {self.n_qubits}")
        for ev in self.events:
            if isinstance(ev, Evolve) and ev.hamiltonian not in self.hamiltonians:
                raise ValueError(f"unknown Hamiltonian {ev.hamiltonian!r}")
            op = ev.op if isinstance(ev, Pulse) else (ev.axis if isinstance(ev, PauliRotation) else None)
            if op is not None and op.n != self.n_qubits:
                raise ValueError("event acts on the wrong register size")
        if self.cyclic and not self.pulse_product_identity():
            raise ValueError("schedule flagged cyclic but its pulse product is not the identity")

    # bookkeeping --------------------------------------------------------
    @property
    def total_duration(self) -> Fraction:
        """Sum of evolution durations measured in units of δt."""
        return sum((ev.duration for ev in self.events if isinstance(ev, Evolve) and not ev.absolute), Fraction(0))

    @property
    def absolute_duration(self) -> float:
        return float(sum(ev.duration for ev in self.events if isinstance(ev, Evolve) and ev.absolute))

    def physical_time(self, dt_value: float) -> float:
        return float(self.total_duration) * dt_value + self.absolute_duration

    @property
    def step_count(self) -> int:
        return sum(1 for ev in self.events if isinstance(ev, Evolve))

    @property
    def pulse_count(self) -> int:
        return sum(1 for ev in self.events if isinstance(ev, Pulse))

    def pulse_product_identity(self) -> bool:
        frame = Frame(self.n_qubits)
        for ev in self.events:
            if isinstance(ev, Pulse):
                frame = frame.apply(ev.op)
        return frame.is_identity()

    def with_target(self, target: WeightedPauliSum | None, **meta) -> "PulseSchedule":
        return replace(self, declared_target=target, metadata={**self.metadata, **meta})

    def embed(self, n_total: int, extra: dict | None = None) -> "PulseSchedule":
        """Same schedule on a larger register; ``extra`` is added to every Hamiltonian."""
        ham = {k: h.embed(n_total) + (extra or WeightedPauliSum.zero(n_total)) for k, h in self.hamiltonians.items()}
        events = []
        for ev in self.events:
            if isinstance(ev, Pulse):
                events.append(Pulse(ev.op.embed(n_total)))
            elif isinstance(ev, PauliRotation):
                events.append(PauliRotation(ev.axis.embed(n_total), ev.angle, ev.dt_power))
            else:
                events.append(ev)
        target = self.declared_target.embed(n_total) if self.declared_target is not None else None
        return PulseSchedule(n_total, tuple(events), ham, target, self.cyclic, dict(self.metadata))

    # serialization --------------------------------------------------------
    def to_json(self) -> dict:
        events = []
        for ev in self.events:
            if isinstance(ev, Pulse) and isinstance(ev.op, CliffordLayer):
                events.append({"type": "pulse", "payload": ev.op.to_json(), "duration": 0})
            elif isinstance(ev, Pulse):
                events.append({"type": "pauli_exp", "payload": ev.op.to_json(), "duration": 0})
            elif isinstance(ev, PauliRotation):
                payload = {"axis": ev.axis.to_json(), "angle": _num_json(ev.angle), "dt_power": ev.dt_power}
                events.append({"type": "rotation", "payload": payload, "duration": 0})
            else:
                payload = {"hamiltonian": ev.hamiltonian, "absolute": ev.absolute}
                events.append({"type": "evolve", "payload": payload, "duration": _num_json(ev.duration)})
        return {
            "n_qubits": self.n_qubits,
            "hamiltonians": {k: self.hamiltonians[k].to_json() for k in sorted(self.hamiltonians)},
            "events": events,
            "declared_target": self.declared_target.to_json() if self.declared_target is not None else None,
            "cyclic": self.cyclic,
            "metadata": self.metadata,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, data: dict | str) -> "PulseSchedule":
        if isinstance(data, str):
            data = json.loads(data)
        n = int(data["n_qubits"])
        ham = {k: WeightedPauliSum.from_json(n, v) for k, v in data["hamiltonians"].items()}
        events = []
        for e in data["events"]:
            t, p = e["type"], e.get("payload", {})
            if t == "pulse":
                events.append(Pulse(CliffordLayer.from_json(n, p)))
            elif t == "pauli_exp":
                events.append(Pulse(PauliExponential.from_json(n, p)))
            elif t == "rotation":
                events.append(PauliRotation(WeightedPauliSum.from_json(n, p["axis"]), _num(p["angle"]), int(p.get("dt_power", 0))))
            elif t == "evolve":
                events.append(Evolve(p["hamiltonian"], _num(e["duration"]), bool(p.get("absolute", False))))
            else:
                raise ValueError(f"unknown event type {t!r}")
        target = data.get("declared_target")
        target = WeightedPauliSum.from_json(n, target) if target is not None else None
        return cls(n, tuple(events), ham, target, bool(data.get("cyclic", True)), dict(data.get("metadata", {})))


class ScheduleBuilder:
    """Accumulates events, fusing adjacent Clifford pulses into one layer."""

    def __init__(self, n: int, hamiltonians: dict | None = None):
        self.n = n
        self.hamiltonians = dict(hamiltonians or {})
        self.events: list = []

    def pulse(self, op) -> "ScheduleBuilder":
        if isinstance(op, str):
            op = CliffordLayer.from_string(op, self.n)
        if isinstance(op, PhasedPauli):
            op = CliffordLayer.from_pauli(op)
        if isinstance(op, CliffordLayer):
            if self.events and isinstance(self.events[-1], Pulse) and isinstance(self.events[-1].op, CliffordLayer):
                op = op @ self.events.pop().op
            if op.is_identity():
                return self
        self.events.append(Pulse(op))
        return self

    def evolve(self, name: str = "system", duration=1, absolute: bool = False) -> "ScheduleBuilder":
        self.events.append(Evolve(name, duration, absolute))
        return self

    def rotate(self, axis: WeightedPauliSum, angle, dt_power: int = 0) -> "ScheduleBuilder":
        self.events.append(PauliRotation(axis, angle, dt_power))
        return self

    def extend(self, events: Iterable) -> "ScheduleBuilder":
        for ev in events:
            if isinstance(ev, Pulse):
                self.pulse(ev.op)
            else:
                self.events.append(ev)
        return self

    def build(self, declared_target=None, cyclic: bool | None = None, **metadata) -> PulseSchedule:
        s = PulseSchedule(self.n, tuple(self.events), self.hamiltonians, declared_target, False, metadata)
        if cyclic is None:
            cyclic = s.pulse_product_identity()
        return replace(s, cyclic=cyclic) if cyclic else s


# --------------------------------------------------------------------------
# Frames
# --------------------------------------------------------------------------


class Frame:
    """Cumulative pulse unitary ``Q = O_r ... O_1`` kept as a list of factors."""

    __slots__ = ("n", "ops")

    def __init__(self, n: int, ops: tuple = ()):
        self.n = n
        self.ops = ops

    def apply(self, op) -> "Frame":
        if isinstance(op, CliffordLayer) and self.ops and isinstance(self.ops[-1], CliffordLayer):
            fused = op @ self.ops[-1]
            return Frame(self.n, self.ops[:-1] + ((fused,) if not fused.is_identity() else ()))
        if isinstance(op, CliffordLayer) and op.is_identity():
            return self
        return Frame(self.n, self.ops + (op,))

    def toggle(self, h: WeightedPauliSum) -> WeightedPauliSum:
        """``Q† h Q``."""
        for op in reversed(self.ops):
            h = op.inverse().conjugate(h)
        return h

    def forward(self, h: WeightedPauliSum) -> WeightedPauliSum:
        """``Q h Q†``."""
        for op in self.ops:
            h = op.conjugate(h)
        return h

    def clifford(self) -> CliffordLayer | None:
        """The frame as a single layer when it contains only Clifford factors."""
        if all(isinstance(op, CliffordLayer) for op in self.ops):
            out = CliffordLayer.identity(self.n)
            for op in self.ops:
                out = op @ out
            return out
        return None

    def is_identity(self) -> bool:
        layer = self.clifford()
        if layer is not None:
            return layer.is_identity()
        for q in range(self.n):
            for letter in "XZ":
                p = WeightedPauliSum.from_pauli(PhasedPauli.single(self.n, q, letter))
                if self.forward(p) != p:
                    return False
        return True


class Segment(NamedTuple):
    """Piecewise-constant segment: exponent ``-i duration δt^dt_power hamiltonian``."""

    hamiltonian: WeightedPauliSum
    duration: Fraction | float
    dt_power: int = 1

    def generator(self) -> WeightedPauliSum:
        return self.hamiltonian.shift(dt=self.dt_power) * self.duration


@dataclass(frozen=True)
class TogglingFrame:
    segments: tuple
    final_frame: Frame
    frames: tuple

    @property
    def cyclic(self) -> bool:
        return self.final_frame.is_identity()

    def __iter__(self):
        return iter(self.segments)

    def __len__(self):
        return len(self.segments)


def _frame_rotation(h: WeightedPauliSum, duration) -> PauliExponential | None:
    """Treat an absolute evolution as an exact frame rotation when possible."""
    if h.grades() - {(0, 0)}:
        return None
    try:
        op = PauliExponential(h, float(duration))
    except ValueError:
        return None
    return op if op.is_exact() else None


def toggling_frame(s: PulseSchedule) -> TogglingFrame:
    """Absorb all pulses into the frame; one segment per evolution or rotation.

    Absolute-time evolutions under commuting Hamiltonians whose angles are
    multiples of π/4 become exact frame rotations instead of segments.
    """
    frame = Frame(s.n_qubits)
    segments = []
    frames = []
    for ev in s.events:
        if isinstance(ev, Pulse):
            if isinstance(ev.op, PauliExponential) and not ev.op.is_exact():
                raise InexactPulseError(f"pulse angle {ev.op.theta} is not a multiple of pi/4")
            frame = frame.apply(ev.op)
        elif isinstance(ev, Evolve):
            h = s.hamiltonians[ev.hamiltonian]
            rot = _frame_rotation(h, ev.duration) if ev.absolute else None
            if rot is not None:
                frame = frame.apply(rot)
                continue
            segments.append(Segment(frame.toggle(h), ev.duration, 0 if ev.absolute else 1))
            frames.append(frame)
        else:
            segments.append(Segment(frame.toggle(ev.axis), ev.angle, ev.dt_power))
            frames.append(frame)
    return TogglingFrame(tuple(segments), frame, tuple(frames))


# --------------------------------------------------------------------------
# Schedule transformations
# --------------------------------------------------------------------------


def conjugate_schedule(s: PulseSchedule, u: CliffordLayer) -> PulseSchedule:
    """Schedule for ``u U u†``: ``u†`` is applied first and ``u`` last."""
    b = ScheduleBuilder(s.n_qubits, s.hamiltonians)
    b.pulse(u.inverse())
    b.extend(s.events)
    b.pulse(u)
    target = u.conjugate(s.declared_target) if s.declared_target is not None else None
    out = b.build(target, cyclic=s.cyclic, **s.metadata)
    return out


def schedule_from_frames(
    n: int, hamiltonians: dict, items: Sequence[tuple[CliffordLayer, object]], close: bool = True, **metadata
) -> PulseSchedule:
    """Build a schedule whose k-th segment event runs in cumulative frame ``Q_k``."""
    b = ScheduleBuilder(n, hamiltonians)
    current = CliffordLayer.identity(n)
    for q, ev in items:
        b.pulse(q @ current.inverse())
        b.events.append(ev)
        current = q
    if close:
        b.pulse(current.inverse())
    return b.build(**metadata)


def clifford_frames(s: PulseSchedule) -> list[tuple[CliffordLayer, object]]:
    """``(cumulative frame, event)`` for every non-pulse event."""
    current = CliffordLayer.identity(s.n_qubits)
    out = []
    for ev in s.events:
        if isinstance(ev, Pulse):
            if not isinstance(ev.op, CliffordLayer):
                raise ValueError("frame rewriting needs Clifford pulses only")
            current = ev.op @ current
        else:
            out.append((current, ev))
    return out


def symmetrize(s: PulseSchedule) -> PulseSchedule:
    """Append the mirror image so the toggled segment list is palindromic."""
    if not s.cyclic:
        raise ValueError("symmetrize needs a cyclic schedule")
    if not s.events:
        return s
    items = clifford_frames(s)
    out = schedule_from_frames(s.n_qubits, s.hamiltonians, items + items[::-1], **s.metadata)
    return replace(out, declared_target=s.declared_target * 2 if s.declared_target is not None else None)
