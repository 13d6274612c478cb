import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from strobo.pauli import CliffordLayer, PauliExponential, PhasedPauli, WeightedPauliSum
from strobo.schedule import (
    Evolve,
    PauliRotation,
    Pulse,
    PulseSchedule,
    ScheduleBuilder,
    conjugate_schedule,
    schedule_from_frames,
    symmetrize,
    toggling_frame,
    InexactPulseError,
)

from oracles import dense_product as dense

H = WeightedPauliSum.parse(2, "X1 X2 + 0.5 Z1")


def test_builder_fuses_and_drops_identity():
    b = ScheduleBuilder(2, {"system": H})
    b.pulse("X1").pulse("X1").evolve().pulse("Z2").pulse("H1").evolve().pulse("H1 Z2")
    s = b.build()
    assert [type(e).__name__ for e in s.events] == ["Evolve", "Pulse", "Evolve", "Pulse"]
    assert s.cyclic and s.step_count == 2 and s.total_duration == 2


def test_cyclic_flag_requires_identity_product():
    with pytest.raises(ValueError):
        PulseSchedule(1, (Pulse(CliffordLayer.from_string("X1", 1)),), {}, None, True)


def test_unknown_hamiltonian_and_bad_duration():
    with pytest.raises(ValueError):
        PulseSchedule(1, (Evolve("nope"),), {}, None, False)
    with pytest.raises(ValueError):
        Evolve("system", 0)


gate = st.sampled_from(["I", "X", "Y", "Z", "H", "S", "W"])


@given(st.lists(st.tuples(gate, gate), min_size=1, max_size=4), st.floats(1e-3, 0.2))
def test_toggling_frame_matches_dense(frames, dt):
    items = [(CliffordLayer.from_string(f"{a}1 {b}2", 2), Evolve("system", 1)) for a, b in frames]
    s = schedule_from_frames(2, {"system": H}, items)
    tf = toggling_frame(s)
    u = np.eye(4, dtype=complex)
    for seg in tf.segments:
        u = sla.expm(-1j * seg.generator().to_matrix(dt)) @ u
    assert tf.cyclic
    ref = dense(s, dt)
    phase = np.vdot(u.ravel(), ref.ravel())
    assert np.allclose(ref, phase / abs(phase) * u, atol=1e-10)


def test_rotation_events_toggle_like_segments():
    b = ScheduleBuilder(2, {"system": H})
    b.pulse("H1").rotate(WeightedPauliSum.parse(2, "Z1"), "1/2", 1).pulse("H1")
    tf = toggling_frame(b.build())
    assert tf.segments[0].generator() == WeightedPauliSum.from_terms(2, [("X1", "1/2", 1)])


def test_inexact_pauli_exponential_is_refused_symbolically():
    b = ScheduleBuilder(1, {"system": WeightedPauliSum.parse(1, "Z1")})
    b.pulse(PauliExponential(WeightedPauliSum.parse(1, "X1"), 0.3)).evolve()
    s = b.build(cyclic=False)
    with pytest.raises(InexactPulseError):
        toggling_frame(s)


def test_json_round_trip_preserves_everything():
    b = ScheduleBuilder(2, {"system": H})
    b.pulse("S1").evolve(duration="3/2").rotate(WeightedPauliSum.parse(2, "Y2"), 0.25, 2).pulse("Sdg1")
    s = b.build(WeightedPauliSum.from_terms(2, [("X1", 3, 2)]), note="x")
    back = PulseSchedule.from_json(s.dumps())
    assert back.dumps() == s.dumps()
    assert back.declared_target == s.declared_target and back.metadata == {"note": "x"}


def test_conjugate_schedule_conjugates_target():
    items = [(CliffordLayer.identity(2), Evolve()), (CliffordLayer.from_string("Z1", 2), Evolve())]
    s = schedule_from_frames(2, {"system": H}, items).with_target(WeightedPauliSum.parse(2, "X1 X2"))
    u = CliffordLayer.from_string("H1 H2", 2)
    c = conjugate_schedule(s, u)
    assert c.declared_target == WeightedPauliSum.parse(2, "Z1 Z2")
    um = u.to_matrix()
    ref = um @ dense(s, 0.05) @ um.conj().T
    assert np.allclose(dense(c, 0.05), ref, atol=1e-12)


def test_symmetrize_doubles_target_and_is_palindromic():
    items = [(CliffordLayer.identity(2), Evolve()), (CliffordLayer.from_string("Z1", 2), Evolve())]
    s = schedule_from_frames(2, {"system": H}, items).with_target(WeightedPauliSum.parse(2, "X1 X2"))
    sym = symmetrize(s)
    assert sym.step_count == 4
    assert sym.declared_target == WeightedPauliSum.parse(2, "2 X1 X2")
