"""Columnar Pauli tables for vectorised commutators.

Coefficients are held either as integers (exact sums rescaled by a common
denominator) or as float64.  Integer tables silently move to Python-int object
arrays when a product could overflow int64.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .pauli import WeightedPauliSum

_CHUNK = 1 << 21
_I64_SAFE = 1 << 62


def _phase_exponent(xa, za, xb, zb):
    """Vectorised exponent k with P_a P_b = i^k P_(a^b)."""
    ya = xa & za
    xo = xa & ~za
    zo = za & ~xa
    plus = (ya & zb & ~xb) | (xo & zb & xb) | (zo & xb & ~zb)
    minus = (ya & xb & ~zb) | (xo & zb & ~xb) | (zo & xb & zb)
    return (np.bitwise_count(plus).astype(np.int64) - np.bitwise_count(minus).astype(np.int64)) % 4


class PauliTable:
    """Arrays ``x, z`` (uint64), grades ``dp, lp`` (int64) and coefficients ``c``.

    ``denom`` is the common denominator of an exact table (coefficient value =
    ``c / denom``); it is ``None`` for float tables.
    """

    __slots__ = ("n", "x", "z", "dp", "lp", "c", "denom")

    def __init__(self, n, x, z, dp, lp, c, denom):
        self.n = n
        self.x, self.z, self.dp, self.lp, self.c = x, z, dp, lp, c
        self.denom = denom

    @property
    def size(self) -> int:
        return len(self.c)

    @classmethod
    def empty(cls, n: int, denom) -> "PauliTable":
        e = np.zeros(0, dtype=np.uint64)
        i = np.zeros(0, dtype=np.int64)
        c = np.zeros(0, dtype=np.int64 if denom is not None else np.float64)
        return cls(n, e, e.copy(), i, i.copy(), c, denom)

    @classmethod
    def from_sums(cls, sums: list[WeightedPauliSum], denom: int | None = None) -> list["PauliTable"]:
        """Tables sharing one denominator (exact sums) or float tables."""
        if not sums:
            return []
        n = sums[0].n
        if n > 64:
            raise ValueError("vectorised path supports at most 64 qubits")
        exact = all(s.is_exact() for s in sums)
        if exact and denom is None:
            denom = 1
            for s in sums:
                for _, c in s.raw_items():
                    denom = math.lcm(denom, c.denominator)
        out = []
        for s in sums:
            items = list(s.raw_items())
            x = np.array([k[0] for k, _ in items], dtype=np.uint64)
            z = np.array([k[1] for k, _ in items], dtype=np.uint64)
            dp = np.array([k[2] for k, _ in items], dtype=np.int64)
            lp = np.array([k[3] for k, _ in items], dtype=np.int64)
            if exact:
                vals = [int(c * denom) for _, c in items]
                big = any(abs(v) >= _I64_SAFE for v in vals)
                c = np.array(vals, dtype=object if big else np.int64)
                out.append(cls(n, x, z, dp, lp, c, denom))
            else:
                c = np.array([float(v) for _, v in items], dtype=np.float64)
                out.append(cls(n, x, z, dp, lp, c, None))
        return out

    def to_sum(self) -> WeightedPauliSum:
        t = self.reduced()
        terms = {}
        for x, z, a, q, c in zip(t.x.tolist(), t.z.tolist(), t.dp.tolist(), t.lp.tolist(), t.c.tolist()):
            terms[(x, z, a, q)] = Fraction(int(c), t.denom) if t.denom is not None else float(c)
        return WeightedPauliSum(self.n, terms, _trusted=True)

    # ------------------------------------------------------------------
    def _maxabs(self) -> int:
        if self.size == 0:
            return 0
        return int(max(abs(int(v)) for v in (self.c.max(), self.c.min())))

    def scaled(self, k) -> "PauliTable":
        return PauliTable(self.n, self.x, self.z, self.dp, self.lp, self._safe_mul(self.c, k), self.denom)

    @staticmethod
    def _safe_mul(c, k):
        if c.dtype == np.int64 and c.size and int(np.abs(c).max()) * abs(int(k)) >= _I64_SAFE:
            c = c.astype(object)
        return c * k

    def with_denom(self, denom: int) -> "PauliTable":
        """Rescale an exact table to a multiple of its denominator."""
        if denom % self.denom:
            raise ValueError("new denominator must be a multiple")
        t = self.scaled(denom // self.denom)
        t.denom = denom
        return t

    def __add__(self, other: "PauliTable") -> "PauliTable":
        a, b = self, other
        if a.denom is not None and b.denom is not None and a.denom != b.denom:
            d = math.lcm(a.denom, b.denom)
            a, b = a.with_denom(d), b.with_denom(d)
        c = _concat(a.c, b.c)
        return PauliTable(
            a.n,
            np.concatenate([a.x, b.x]),
            np.concatenate([a.z, b.z]),
            np.concatenate([a.dp, b.dp]),
            np.concatenate([a.lp, b.lp]),
            c,
            a.denom,
        ).reduced()

    def __neg__(self) -> "PauliTable":
        return PauliTable(self.n, self.x, self.z, self.dp, self.lp, -self.c, self.denom)

    def __sub__(self, other):
        return self + (-other)

    def reduced(self) -> "PauliTable":
        """Merge equal keys and drop zero coefficients."""
        if self.size == 0:
            return self
        order = np.lexsort((self.lp, self.dp, self.z, self.x))
        x, z, dp, lp, c = self.x[order], self.z[order], self.dp[order], self.lp[order], self.c[order]
        new = np.ones(len(c), dtype=bool)
        new[1:] = (x[1:] != x[:-1]) | (z[1:] != z[:-1]) | (dp[1:] != dp[:-1]) | (lp[1:] != lp[:-1])
        starts = np.flatnonzero(new)
        csum = np.add.reduceat(c, starts)
        keep = csum != 0
        if c.dtype == object:
            keep = np.array([v != 0 for v in csum], dtype=bool)
        starts = starts[keep]
        return PauliTable(self.n, x[starts], z[starts], dp[starts], lp[starts], csum[keep], self.denom)

    def commutator_i(self, other: "PauliTable") -> "PauliTable":
        """Vectorised ``i[A, B]``; the result's denominator is the product."""
        denom = None if self.denom is None else self.denom * other.denom
        if self.size == 0 or other.size == 0:
            return PauliTable.empty(self.n, denom)
        ca, cb = self.c, other.c
        if ca.dtype != np.float64:
            bound = 2 * self._maxabs() * other._maxabs() * min(self.size, other.size)
            if bound >= _I64_SAFE:
                ca, cb = ca.astype(object), cb.astype(object)
        rows = max(1, _CHUNK // max(1, other.size))
        parts = []
        for start in range(0, self.size, rows):
            sl = slice(start, start + rows)
            xa, za = self.x[sl, None], self.z[sl, None]
            anti = (np.bitwise_count(xa & other.z[None, :]) + np.bitwise_count(za & other.x[None, :])) & 1
            i, j = np.nonzero(anti)
            if i.size == 0:
                continue
            i = i + start
            xa, za, xb, zb = self.x[i], self.z[i], other.x[j], other.z[j]
            k = _phase_exponent(xa, za, xb, zb)
            sign = np.where((k + 1) % 4 == 0, 2, -2)
            c = ca[i] * cb[j] * sign
            parts.append(
                PauliTable(self.n, xa ^ xb, za ^ zb, self.dp[i] + other.dp[j], self.lp[i] + other.lp[j], c, denom)
                .reduced()
            )
        if not parts:
            return PauliTable.empty(self.n, denom)
        out = parts[0]
        for p in parts[1:]:
            out = out + p
        return out


def _concat(a, b):
    if a.dtype == object or b.dtype == object:
        return np.concatenate([a.astype(object), b.astype(object)])
    return np.concatenate([a, b])
