"""Exact Magnus expansion for piecewise-constant segment lists.

Write the ordered product ``U = exp(-i W_n) ... exp(-i W_1)`` with segment
exponents ``W_k = duration_k · δt^p_k · H_k``.  Then ``U = exp(-i Ω)`` with
``Ω = Φ1 + Φ2 + Φ3 + O(W^4)``:

    Φ1 = Σ_k W_k
    Φ2 = -1/2 Σ_{l>k} i[W_l, W_k]
    Φ3 = third-order nested sums, evaluated with prefix/suffix partial sums

and ``H_eff^(k) = Φ_{k+1} / T_n`` with ``T_n = Σ duration_k · δt``.  All
coefficients stay rational when the inputs are; the δt and λ grades ride
along in the Pauli keys.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from ._kernel import PauliTable
from .pauli import WeightedPauliSum
from .schedule import PulseSchedule, Segment, toggling_frame

__all__ = ["MagnusReport", "magnus_orders", "magnus_exponent", "effective_hamiltonian"]

MAX_ORDER = 2


def _as_segments(segments: Iterable) -> list[Segment]:
    out = []
    for s in segments:
        if isinstance(s, Segment):
            out.append(s)
        elif len(s) == 2:
            out.append(Segment(s[0], s[1], 1))
        else:
            out.append(Segment(*s))
    return out


def _coalesce(ws: list[WeightedPauliSum]) -> list[WeightedPauliSum]:
    """Merge neighbouring exponents that commute; the product is unchanged."""
    out: list[WeightedPauliSum] = []
    for w in ws:
        if w.is_zero():
            continue
        if out and out[-1].commutes_with(w):
            out[-1] = out[-1] + w
        else:
            out.append(w)
    return out


def _prefix(tables: list[PauliTable]) -> list[PauliTable]:
    acc = []
    run = PauliTable.empty(tables[0].n, tables[0].denom)
    for t in tables:
        run = run + t
        acc.append(run)
    return acc


def magnus_exponent(generators: Sequence[WeightedPauliSum], max_order: int = MAX_ORDER) -> list[WeightedPauliSum]:
    """``[Φ1, ..., Φ_{max_order+1}]`` for exponents listed in time order."""
    if max_order > MAX_ORDER or max_order < 0:
        raise ValueError(f"symbolic Magnus terms are available up to order {MAX_ORDER}")
    if not generators:
        raise ValueError("segment list is empty")
    n = generators[0].n
    ws = _coalesce(list(generators))
    phi1 = sum(ws, WeightedPauliSum.zero(n))
    out = [phi1]
    if max_order == 0:
        return out
    if len(ws) < 2:
        return out + [WeightedPauliSum.zero(n)] * max_order
    w = PauliTable.from_sums(ws)
    d = w[0].denom
    pre = _prefix(w)  # pre[l] = W_0 + ... + W_l
    # C_l = i[W_l, S_{l-1}]
    c = [w[l].commutator_i(pre[l - 1]) for l in range(1, len(w))]
    phi2 = c[0]
    for t in c[1:]:
        phi2 = phi2 + t
    phi2_sum = phi2.to_sum() / -2
    out.append(phi2_sum)
    if max_order == 1:
        return out

    m = len(w)
    # suffix sums R_k = W_k + ... + W_{m-1}
    suf = [None] * (m + 1)
    suf[m] = PauliTable.empty(n, d)
    for k in range(m - 1, -1, -1):
        suf[k] = suf[k + 1] + w[k]
    empty3 = PauliTable.empty(n, None if d is None else d ** 3)
    t1 = empty3
    t2 = empty3
    q = PauliTable.empty(n, None if d is None else d * d)  # running Σ_{j<l} C_j
    for l in range(1, m):
        cl = c[l - 1]
        if l >= 2:
            t1 = t1 + w[l].commutator_i(q).scaled(2)
        if l + 1 < m:
            t1 = t1 - w[l].commutator_i(suf[l + 1].commutator_i(pre[l - 1]))
        t2 = t2 + w[l].commutator_i(cl)
        q = q + cl
    for k in range(m - 1):
        t2 = t2 + suf[k + 1].commutator_i(w[k]).commutator_i(w[k])
    out.append(t1.to_sum() / 6 + t2.to_sum() / 12)
    return out


@dataclass
class MagnusReport:
    """Magnus data for a segment list.

    ``exponent[k]`` is ``Φ_{k+1}``; ``orders[k]`` is ``H_eff^(k)`` when every
    segment is measured in δt units (``None`` otherwise, e.g. when absolute
    rotations appear).  ``total_duration`` is ``T_n / δt``.
    """

    exponent: list
    total_duration: Fraction | float
    segment_count: int
    orders: list | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.exponent[0].n

    @property
    def omega(self) -> WeightedPauliSum:
        return sum(self.exponent, WeightedPauliSum.zero(self.n))

    def grading(self) -> dict:
        """``(δt-power, λ-power) -> exponent terms`` over all computed orders."""
        om = self.omega
        return {g: om.graded(*g) for g in sorted(om.grades())}

    def term(self, dt_power: int, lam_power: int | None = None) -> WeightedPauliSum:
        return self.omega.graded(dt_power, lam_power)

    def truncated(self, max_dt_power: int) -> WeightedPauliSum:
        om = self.omega
        return sum((om.graded(a) for a in {g[0] for g in om.grades()} if a <= max_dt_power), WeightedPauliSum.zero(self.n))

    def matches(self, target: WeightedPauliSum, max_dt_power: int | None = None) -> bool:
        """Exact match of the exponent with ``target`` for all grades up to ``max_dt_power``."""
        if max_dt_power is None:
            max_dt_power = max((g[0] for g in target.grades()), default=0)
        return self.truncated(max_dt_power) == target.graded() if target.is_exact() else self.truncated(
            max_dt_power
        ).allclose(target)

    def to_json(self) -> dict:
        grading = []
        for (a, q), terms in self.grading().items():
            grading.append({"dt_power": a, "lambda_power": q, "terms": [
                {"pauli": str(t.pauli), "coeff": str(t.coeff) if isinstance(t.coeff, Fraction) else float(t.coeff)}
                for t in terms
            ]})
        return {
            "segment_count": self.segment_count,
            "total_duration": str(self.total_duration) if isinstance(self.total_duration, Fraction) else float(self.total_duration),
            "exponent_grading": grading,
            "orders": None if self.orders is None else [o.to_json() for o in self.orders],
            "metadata": self.metadata,
        }


def magnus_orders(segments: Iterable, max_order: int = MAX_ORDER) -> MagnusReport:
    """Magnus data of ``(hamiltonian, duration[, dt_power])`` segments in time order."""
    segs = _as_segments(segments)
    if not segs:
        raise ValueError("segment list is empty")
    gens = [s.generator() for s in segs]
    exponent = magnus_exponent(gens, max_order)
    total = sum((s.duration for s in segs if s.dt_power == 1), Fraction(0))
    orders = None
    if all(s.dt_power == 1 for s in segs) and total:
        orders = [phi.shift(dt=-1) / total for phi in exponent]
    return MagnusReport(exponent, total, len(segs), orders)


def effective_hamiltonian(s: PulseSchedule, max_order: int = MAX_ORDER) -> MagnusReport:
    """Toggling frame followed by the symbolic Magnus expansion."""
    tf = toggling_frame(s)
    if not tf.cyclic:
        raise ValueError("the pulse product of the schedule is not the identity")
    if not tf.segments:
        rep = MagnusReport([WeightedPauliSum.zero(s.n_qubits)] * (max_order + 1), Fraction(0), 0, None)
    else:
        rep = magnus_orders(tf.segments, max_order)
    if s.declared_target is not None:
        rep.metadata["declared_target"] = str(s.declared_target)
        rep.metadata["matches_target"] = rep.matches(s.declared_target)
    return rep
