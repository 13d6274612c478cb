"""Independent dense references built only from numpy/scipy."""

import numpy as np
import scipy.linalg as sla

from strobo.schedule import Pulse, PauliRotation, PulseSchedule


def dense_product(s: PulseSchedule, dt: float) -> np.ndarray:
    """Ordered product of the schedule's events, event by event, with ``expm``."""
    u = np.eye(1 << s.n_qubits, dtype=complex)
    for ev in s.events:
        if isinstance(ev, Pulse):
            u = ev.op.to_matrix() @ u
        elif isinstance(ev, PauliRotation):
            u = sla.expm(-1j * float(ev.angle) * dt ** ev.dt_power * ev.axis.to_matrix()) @ u
        else:
            t = float(ev.duration) * (1 if ev.absolute else dt)
            u = sla.expm(-1j * t * s.hamiltonians[ev.hamiltonian].to_matrix()) @ u
    return u


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``min_φ ||a - e^{iφ} b||₂`` using the trace-overlap phase (exact for near-equal unitaries)."""
    ov = np.vdot(b.ravel(), a.ravel())
    ph = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(a - ph * b, 2))


def traceless_log(u: np.ndarray) -> np.ndarray:
    """Hermitian ``Ω`` with ``u ∝ exp(-iΩ)``, trace removed."""
    d = u.shape[0]
    det = np.linalg.det(u)
    v = u * det ** (-1.0 / d)
    om = 1j * sla.logm(v)
    om = (om + om.conj().T) / 2
    return om - np.trace(om) / d * np.eye(d)
