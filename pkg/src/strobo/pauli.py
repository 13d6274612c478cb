"""Phased Pauli operators, graded Pauli sums and single-qubit Clifford layers.

Paulis are bit packed: bit ``q`` of ``x`` / ``z`` refers to qubit ``q``
(0-based).  The text form is 1-based, e.g. ``"X1 Y2 Z4"``.  Dense matrices use
qubit 0 as the most significant tensor factor.

Sums are stored phase-free with real coefficients, so every sum is Hermitian by
construction.  Coefficients are exact ``Fraction`` values unless a numeric path
(general rotation angles, matrix logs) introduced floats.  Every term carries a
grading ``(dt_power, lam_power)`` so that the order bookkeeping in the Magnus
expansion stays exact.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, NamedTuple

import numpy as np

__all__ = [
    "PhasedPauli",
    "WeightedPauliSum",
    "Term",
    "SingleQubitClifford",
    "CliffordLayer",
    "PauliExponential",
    "multiply",
    "commutes",
    "conjugate",
    "commutator_i",
    "nested_commutator",
    "span_contains",
    "gf2_rank",
    "normalizer",
]

_LETTERS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {v: k for k, v in _LETTERS.items()}
_TOKEN = re.compile(r"([IXYZ])(\d+)")
_SIGN = re.compile(r"^\s*([+-]?)\s*(i?)\s*")

_PAULI_2x2 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _product_phase(x1: int, z1: int, x2: int, z2: int) -> int:
    """Exponent k (mod 4) such that P(x1,z1) P(x2,z2) = i^k P(x1^x2, z1^z2)."""
    y1 = x1 & z1
    xo = x1 & ~z1
    zo = z1 & ~x1
    plus = (y1 & z2 & ~x2) | (xo & z2 & x2) | (zo & x2 & ~z2)
    minus = (y1 & x2 & ~z2) | (xo & z2 & ~x2) | (zo & x2 & z2)
    return (plus.bit_count() - minus.bit_count()) % 4


def _anticommute(x1: int, z1: int, x2: int, z2: int) -> bool:
    return bool(((x1 & z2).bit_count() + (z1 & x2).bit_count()) & 1)


def _to_coeff(c):
    """Normalise a scalar: ints and Fractions stay exact, reals become float."""
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (bool, np.bool_)):
        raise TypeError("boolean coefficient")
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    if isinstance(c, str):
        return Fraction(c)
    if isinstance(c, (complex, np.complexfloating)):
        if abs(c.imag) > 1e-12 * max(1.0, abs(c.real)):
            raise ValueError(f"non-real coefficient {c!r} breaks Hermiticity")
        return float(c.real)
    return float(c)


# --------------------------------------------------------------------------
# PhasedPauli
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PhasedPauli:
    """``i**phase`` times the Pauli string with bit masks ``x`` and ``z``."""

    n: int
    x: int = 0
    z: int = 0
    phase: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("negative qubit count")
        if self.x < 0 or self.z < 0 or (self.x | self.z) >> self.n:
            raise ValueError(f"bit masks exceed {self.n} qubits")
        object.__setattr__(self, "phase", self.phase % 4)

    # construction -------------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "PhasedPauli":
        return cls(n)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PhasedPauli":
        bx, bz = _BITS[letter]
        return cls(n, bx << qubit, bz << qubit)

    @classmethod
    def from_string(cls, text: str, n: int | None = None) -> "PhasedPauli":
        """Parse ``"X1 Y2 Z4"``, ``"X1X2"``, ``"-iZ3"`` or ``"I"``."""
        m = _SIGN.match(text)
        phase = (2 if m.group(1) == "-" else 0) + (1 if m.group(2) else 0)
        body = text[m.end():].replace(" ", "").replace("*", "")
        x = z = 0
        top = 0
        pos = 0
        for tok in _TOKEN.finditer(body):
            if tok.start() != pos:
                raise ValueError(f"cannot parse Pauli string {text!r}")
            pos = tok.end()
            q = int(tok.group(2)) - 1
            if q < 0:
                raise ValueError("qubit labels are 1-based")
            if (x | z) >> q & 1:
                raise ValueError(f"qubit {q + 1} repeated in {text!r}")
            letter = tok.group(1)
            if letter == "I":
                top = max(top, q + 1)
                continue
            bx, bz = _BITS[letter]
            x |= bx << q
            z |= bz << q
            top = max(top, q + 1)
        if pos != len(body) and body not in ("I", ""):
            raise ValueError(f"cannot parse Pauli string {text!r}")
        if n is None:
            n = top
        elif top > n:
            raise ValueError(f"{text!r} does not fit on {n} qubits")
        return cls(n, x, z, phase)

    @classmethod
    def from_label(cls, label: str) -> "PhasedPauli":
        """Compact label, one letter per qubit: ``"XIZY"``."""
        x = z = 0
        for q, ch in enumerate(label):
            bx, bz = _BITS[ch]
            x |= bx << q
            z |= bz << q
        return cls(len(label), x, z)

    # queries ------------------------------------------------------------
    def letter(self, q: int) -> str:
        return _LETTERS[(self.x >> q & 1, self.z >> q & 1)]

    @property
    def label(self) -> str:
        return "".join(self.letter(q) for q in range(self.n))

    @property
    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    @property
    def support(self) -> tuple[int, ...]:
        m = self.x | self.z
        return tuple(q for q in range(self.n) if m >> q & 1)

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    def strip(self) -> "PhasedPauli":
        return PhasedPauli(self.n, self.x, self.z)

    def adjoint(self) -> "PhasedPauli":
        return PhasedPauli(self.n, self.x, self.z, -self.phase)

    def embed(self, n_total: int) -> "PhasedPauli":
        return PhasedPauli(n_total, self.x, self.z, self.phase)

    def __mul__(self, other: "PhasedPauli") -> "PhasedPauli":
        return multiply(self, other)

    def commutes(self, other: "PhasedPauli") -> bool:
        return commutes(self, other)

    def to_matrix(self) -> np.ndarray:
        out = np.array([[1j ** self.phase]], dtype=complex)
        for q in range(self.n):
            out = np.kron(out, _PAULI_2x2[self.letter(q)])
        return out

    def __str__(self) -> str:
        prefix = ("", "i", "-", "-i")[self.phase]
        body = " ".join(f"{self.letter(q)}{q + 1}" for q in self.support)
        return prefix + (body or "I")


def multiply(p: PhasedPauli, q: PhasedPauli) -> PhasedPauli:
    """Exact product ``p·q`` with phase."""
    if p.n != q.n:
        raise ValueError(f"qubit count mismatch: {p.n} vs {q.n}")
    k = _product_phase(p.x, p.z, q.x, q.z)
    return PhasedPauli(p.n, p.x ^ q.x, p.z ^ q.z, p.phase + q.phase + k)


def commutes(p: PhasedPauli, q: PhasedPauli) -> bool:
    if p.n != q.n:
        raise ValueError(f"qubit count mismatch: {p.n} vs {q.n}")
    return not _anticommute(p.x, p.z, q.x, q.z)


# --------------------------------------------------------------------------
# WeightedPauliSum
# --------------------------------------------------------------------------


class Term(NamedTuple):
    pauli: PhasedPauli
    coeff: object
    dt_power: int
    lam_power: int


def _bitrev(v: int, n: int) -> int:
    return int(format(v, f"0{n}b")[::-1], 2) if n else 0


_TERM_RE = re.compile(
    r"\s*(?P<sign>(?:[+-]\s*)*)"
    r"(?P<coeff>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?(?:/\d+)?)?\s*\*?\s*"
    r"(?P<ops>(?:[IXYZ]\d+\s*)*)"
)


class WeightedPauliSum:
    """Real linear combination of Paulis, each graded by ``δt^a λ^q``.

    Keys are ``(x, z, dt_power, lam_power)``.  Instances are immutable; all
    arithmetic returns new objects.
    """

    __slots__ = ("n", "_terms", "_hash")

    def __init__(self, n: int, terms: dict | None = None, *, _trusted: bool = False):
        self.n = int(n)
        if _trusted:
            self._terms = terms
        else:
            clean = {}
            for key, c in (terms or {}).items():
                x, z, a, q = (int(k) for k in key)
                if (x | z) >> self.n:
                    raise ValueError("term exceeds register")
                c = _to_coeff(c)
                if c != 0:
                    k = (x, z, a, q)
                    clean[k] = clean.get(k, 0) + c
                    if clean[k] == 0:
                        del clean[k]
            self._terms = clean
        self._hash = None

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, n: int) -> "WeightedPauliSum":
        return cls(n, {}, _trusted=True)

    @classmethod
    def from_pauli(cls, p: PhasedPauli, coeff=1, dt_power: int = 0, lam_power: int = 0):
        if p.phase % 2:
            raise ValueError("anti-Hermitian Pauli cannot enter a Hermitian sum")
        c = _to_coeff(coeff) * (-1 if p.phase == 2 else 1)
        return cls(p.n, {(p.x, p.z, dt_power, lam_power): c})

    @classmethod
    def from_terms(cls, n: int, items: Iterable) -> "WeightedPauliSum":
        """Build from ``(pauli, coeff[, dt_power[, lam_power]])`` tuples.

        ``pauli`` may be a :class:`PhasedPauli` or a string such as ``"X1 X2"``.
        """
        acc: dict = {}
        for item in items:
            p, c, *rest = item
            a = rest[0] if len(rest) > 0 else 0
            q = rest[1] if len(rest) > 1 else 0
            if isinstance(p, str):
                p = PhasedPauli.from_string(p, n)
            if p.n != n:
                raise ValueError("qubit count mismatch")
            if p.phase % 2:
                raise ValueError("anti-Hermitian Pauli cannot enter a Hermitian sum")
            c = _to_coeff(c) * (-1 if p.phase == 2 else 1)
            key = (p.x, p.z, a, q)
            acc[key] = acc.get(key, 0) + c
        return cls(n, acc)

    @classmethod
    def parse(cls, n: int, text: str) -> "WeightedPauliSum":
        """Parse ``"2 X1 X2 + 1/2 Z3 - Y1"`` (ungraded)."""
        items = []
        pos, text = 0, text.strip()
        while pos < len(text):
            m = _TERM_RE.match(text, pos)
            if m is None or m.end() == pos or not (m.group("coeff") or m.group("ops").strip()):
                raise ValueError(f"cannot parse Pauli sum near {text[pos:]!r}")
            raw = m.group("coeff")
            if raw is None:
                coeff = Fraction(1)
            elif "." in raw or "e" in raw.lower():
                coeff = float(raw)
            else:
                coeff = _to_coeff(raw)
            if m.group("sign").count("-") % 2:
                coeff = -coeff
            items.append((m.group("ops").strip() or "I", coeff))
            pos = m.end()
        return cls.from_terms(n, items)

    # container protocol ---------------------------------------------------
    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def keys(self):
        return self._terms.keys()

    def raw_items(self):
        return self._terms.items()

    def coeff(self, pauli: PhasedPauli | str, dt_power: int = 0, lam_power: int = 0):
        if isinstance(pauli, str):
            pauli = PhasedPauli.from_string(pauli, self.n)
        return self._terms.get((pauli.x, pauli.z, dt_power, lam_power), 0)

    def _sort_key(self, key):
        x, z, a, q = key
        return (a, q, _bitrev(z, self.n), _bitrev(x, self.n))

    def sorted_keys(self) -> list:
        return sorted(self._terms, key=self._sort_key)

    def __iter__(self) -> Iterator[Term]:
        for key in self.sorted_keys():
            x, z, a, q = key
            yield Term(PhasedPauli(self.n, x, z), self._terms[key], a, q)

    def paulis(self) -> list[PhasedPauli]:
        seen = []
        done = set()
        for key in self.sorted_keys():
            if key[:2] not in done:
                done.add(key[:2])
                seen.append(PhasedPauli(self.n, key[0], key[1]))
        return seen

    def grades(self) -> set:
        return {(a, q) for (_, _, a, q) in self._terms}

    def support(self) -> tuple[int, ...]:
        m = 0
        for x, z, _, _ in self._terms:
            m |= x | z
        return tuple(q for q in range(self.n) if m >> q & 1)

    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self._terms.values())

    # comparison ---------------------------------------------------------
    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)) and other == 0:
            return self.is_zero()
        if not isinstance(other, WeightedPauliSum):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, frozenset(self._terms.items())))
        return self._hash

    def allclose(self, other: "WeightedPauliSum", atol: float = 1e-12) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(abs(float(self._terms.get(k, 0)) - float(other._terms.get(k, 0))) <= atol for k in keys)

    # arithmetic ---------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, WeightedPauliSum):
            raise TypeError("expected WeightedPauliSum")
        if other.n != self.n:
            raise ValueError(f"qubit count mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)) and other == 0:
            return self
        self._check(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            v = out.get(k, 0) + c
            if v == 0:
                out.pop(k, None)
            else:
                out[k] = v
        return WeightedPauliSum(self.n, out, _trusted=True)

    __radd__ = __add__

    def __neg__(self):
        return WeightedPauliSum(self.n, {k: -c for k, c in self._terms.items()}, _trusted=True)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        s = _to_coeff(scalar)
        if s == 0:
            return WeightedPauliSum.zero(self.n)
        return WeightedPauliSum(self.n, {k: c * s for k, c in self._terms.items()}, _trusted=True)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        s = _to_coeff(scalar)
        return self * (1 / s)

    def graded(self, dt_power: int | None = None, lam_power: int | None = None) -> "WeightedPauliSum":
        """Terms of the given grade (``None`` matches any power)."""
        return WeightedPauliSum(
            self.n,
            {
                k: c
                for k, c in self._terms.items()
                if (dt_power is None or k[2] == dt_power) and (lam_power is None or k[3] == lam_power)
            },
            _trusted=True,
        )

    def shift(self, dt: int = 0, lam: int = 0) -> "WeightedPauliSum":
        return WeightedPauliSum(
            self.n, {(x, z, a + dt, q + lam): c for (x, z, a, q), c in self._terms.items()}, _trusted=True
        )

    def evaluate(self, dt_value: float = 1.0, lam_value: float = 1.0) -> "WeightedPauliSum":
        """Substitute numbers for δt and λ; the result is ungraded with float coefficients."""
        out: dict = {}
        for (x, z, a, q), c in self._terms.items():
            v = float(c) * float(dt_value) ** a * float(lam_value) ** q
            out[(x, z, 0, 0)] = out.get((x, z, 0, 0), 0.0) + v
        return WeightedPauliSum(self.n, {k: v for k, v in out.items() if v != 0}, _trusted=True)

    def chop(self, tol: float = 1e-12) -> "WeightedPauliSum":
        return WeightedPauliSum(self.n, {k: c for k, c in self._terms.items() if abs(c) > tol}, _trusted=True)

    def embed(self, n_total: int) -> "WeightedPauliSum":
        if n_total < self.n:
            raise ValueError("cannot embed into a smaller register")
        return WeightedPauliSum(n_total, dict(self._terms), _trusted=True)

    def norm1(self, dt_value: float = 1.0, lam_value: float = 1.0) -> float:
        return float(sum(abs(c) for c in self.evaluate(dt_value, lam_value)._terms.values()))

    def sq_norm(self):
        """Sum of squared coefficients per grade key (exact for exact sums)."""
        return sum(c * c for c in self._terms.values())

    def commutes_with(self, other: "WeightedPauliSum") -> bool:
        return commutator_i(self, other).is_zero()

    def to_matrix(self, dt_value: float = 1.0, lam_value: float = 1.0) -> np.ndarray:
        d = 1 << self.n
        out = np.zeros((d, d), dtype=complex)
        idx = np.arange(d)
        for (x, z, _, _), c in self.evaluate(dt_value, lam_value)._terms.items():
            xm, zm = _bitrev(x, self.n), _bitrev(z, self.n)
            # P|c> = i^{|x&z|} (-1)^{z.c} |c ^ x>
            signs = 1 - 2 * (np.bitwise_count(idx & zm).astype(np.int64) & 1)
            out[idx ^ xm, idx] += c * (1j ** ((x & z).bit_count() % 4)) * signs
        return out

    # serialization ------------------------------------------------------
    def to_json(self) -> list:
        out = []
        for t in self:
            c = t.coeff
            cj = (str(c) if c.denominator != 1 else c.numerator) if isinstance(c, Fraction) else float(c)
            out.append({"pauli": str(t.pauli), "coeff": cj, "dt_power": t.dt_power, "lambda_power": t.lam_power})
        return out

    @classmethod
    def from_json(cls, n: int, data: list) -> "WeightedPauliSum":
        items = []
        for d in data:
            c = d["coeff"]
            c = Fraction(c) if isinstance(c, (int, str)) else float(c)
            items.append((d["pauli"], c, int(d.get("dt_power", 0)), int(d.get("lambda_power", 0))))
        return cls.from_terms(n, items)

    def __repr__(self) -> str:
        return f"WeightedPauliSum(n={self.n}, {self})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for t in self:
            g = ""
            if t.dt_power:
                g += f" dt^{t.dt_power}"
            if t.lam_power:
                g += f" lam^{t.lam_power}"
            parts.append(f"{t.coeff}{g} {t.pauli}")
        return " + ".join(parts)


def commutator_i(a: WeightedPauliSum, b: WeightedPauliSum) -> WeightedPauliSum:
    """Hermitian sum ``i[A, B]``, expanded term by term."""
    if a.n != b.n:
        raise ValueError(f"qubit count mismatch: {a.n} vs {b.n}")
    if len(a) * len(b) >= 256 and a.n <= 64:
        from ._kernel import PauliTable

        ta, tb = PauliTable.from_sums([a, b])
        return ta.commutator_i(tb).to_sum()
    acc: dict = {}
    for (x1, z1, a1, q1), c1 in a.raw_items():
        for (x2, z2, a2, q2), c2 in b.raw_items():
            if not _anticommute(x1, z1, x2, z2):
                continue
            k = _product_phase(x1, z1, x2, z2)
            # i[P,Q] = 2i PQ = 2 i^(k+1) R, with k odd
            s = 2 if (k + 1) % 4 == 0 else -2
            key = (x1 ^ x2, z1 ^ z2, a1 + a2, q1 + q2)
            v = acc.get(key, 0) + s * c1 * c2
            if v == 0:
                acc.pop(key, None)
            else:
                acc[key] = v
    return WeightedPauliSum(a.n, acc, _trusted=True)


def nested_commutator(a: WeightedPauliSum, b: WeightedPauliSum, c: WeightedPauliSum) -> WeightedPauliSum:
    """``[[A, B], C]`` for Hermitian sums; the result is Hermitian."""
    return -commutator_i(commutator_i(a, b), c)


# --------------------------------------------------------------------------
# Single-qubit Cliffords
# --------------------------------------------------------------------------

_OMEGA = np.exp(1j * np.pi / 4)
_GEN_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": _PAULI_2x2["X"],
    "Y": _PAULI_2x2["Y"],
    "Z": _PAULI_2x2["Z"],
    "W": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "S": np.diag([1, 1j]),
    "Sdg": np.diag([1, -1j]),
}


def _image_table(u: np.ndarray) -> tuple:
    """Images of X, Y, Z under conjugation by ``u`` as ((sign, letter), ...)."""
    out = []
    for p in "XYZ":
        m = u @ _PAULI_2x2[p] @ u.conj().T
        for letter in "XYZ":
            t = np.trace(_PAULI_2x2[letter] @ m).real / 2
            if abs(abs(t) - 1) < 1e-9:
                out.append((1 if t > 0 else -1, letter))
                break
        else:  # pragma: no cover - u is always Clifford here
            raise ValueError("matrix is not a Clifford")
    return tuple(out)


@lru_cache(maxsize=None)
def _clifford_group():
    """Enumerate the 24 single-qubit Cliffords with shortest generator words."""
    names: list[str] = []
    mats: list[np.ndarray] = []
    tables: list[tuple] = []
    index: dict = {}
    frontier = [("I", _GEN_MATS["I"])]
    while frontier:
        nxt = []
        for word, m in frontier:
            t = _image_table(m)
            if t in index:
                continue
            index[t] = len(names)
            names.append(word)
            mats.append(m)
            tables.append(t)
            for g in ("X", "Y", "Z", "W", "S", "Sdg"):
                w = g if word == "I" else f"{word}*{g}"
                nxt.append((w, m @ _GEN_MATS[g]))
        frontier = nxt
    assert len(names) == 24

    def locate(m):
        e = index[_image_table(m)]
        at = np.unravel_index(np.argmax(abs(mats[e])), (2, 2))
        k = int(round(np.angle(m[at] / mats[e][at]) / (np.pi / 4))) % 8
        return e, k

    mul = [[locate(mats[a] @ mats[b]) for b in range(24)] for a in range(24)]
    inv = [locate(mats[a].conj().T) for a in range(24)]
    return tuple(names), tuple(mats), tuple(tables), index, mul, inv


@dataclass(frozen=True)
class SingleQubitClifford:
    """Element of the single-qubit Clifford group times a phase ``ω^phase``."""

    elem: int
    phase: int = 0

    @classmethod
    def named(cls, word: str) -> "SingleQubitClifford":
        word = word.replace("S†", "Sdg").replace("H", "W")
        out = cls(0)
        for g in word.split("*"):
            if g not in _GEN_MATS:
                raise ValueError(f"unknown Clifford generator {g!r}")
            _, mats, tables, index, _, _ = _clifford_group()
            e = index[_image_table(_GEN_MATS[g])]
            at = np.unravel_index(np.argmax(abs(mats[e])), (2, 2))
            k = int(round(np.angle(_GEN_MATS[g][at] / mats[e][at]) / (np.pi / 4))) % 8
            out = out @ cls(e, k)
        return out

    def __post_init__(self):
        object.__setattr__(self, "phase", self.phase % 8)

    def __matmul__(self, other: "SingleQubitClifford") -> "SingleQubitClifford":
        e, k = _clifford_group()[4][self.elem][other.elem]
        return SingleQubitClifford(e, self.phase + other.phase + k)

    def inverse(self) -> "SingleQubitClifford":
        e, k = _clifford_group()[5][self.elem]
        return SingleQubitClifford(e, k - self.phase)

    @property
    def name(self) -> str:
        return _clifford_group()[0][self.elem]

    @property
    def images(self) -> tuple:
        """Images of X, Y, Z as (sign, letter)."""
        return _clifford_group()[2][self.elem]

    @property
    def is_identity(self) -> bool:
        return self.elem == 0

    @property
    def is_pauli(self) -> bool:
        return self.name in ("I", "X", "Y", "Z")

    def matrix(self) -> np.ndarray:
        return _clifford_group()[1][self.elem] * _OMEGA ** self.phase


_GATE_TOKEN = re.compile(r"(Sdg|S†|[IXYZWSH])(\d+)")


class CliffordLayer:
    """Tensor product of single-qubit Cliffords; identity factors omitted.

    ``a @ b`` is the operator product (``b`` acts first).  A global phase
    ``ω^phase`` is tracked so that cycle products stay exact.
    """

    __slots__ = ("n", "gates", "phase")

    def __init__(self, n: int, gates: dict | None = None, phase: int = 0):
        self.n = int(n)
        ph = phase
        clean = {}
        for q, g in (gates or {}).items():
            if not 0 <= q < self.n:
                raise ValueError(f"qubit {q} outside register of {n}")
            if isinstance(g, str):
                g = SingleQubitClifford.named(g)
            ph += g.phase
            if g.elem != 0:
                clean[int(q)] = SingleQubitClifford(g.elem)
        self.gates = dict(sorted(clean.items()))
        self.phase = ph % 8

    @classmethod
    def identity(cls, n: int) -> "CliffordLayer":
        return cls(n)

    @classmethod
    def from_string(cls, text: str, n: int) -> "CliffordLayer":
        """Parse ``"W1 W2 Z1"``; tokens on the same qubit multiply left to right."""
        gates: dict = {}
        body = text.replace(" ", "").replace("*", "")
        pos = 0
        for tok in _GATE_TOKEN.finditer(body):
            if tok.start() != pos:
                raise ValueError(f"cannot parse layer {text!r}")
            pos = tok.end()
            q = int(tok.group(2)) - 1
            g = SingleQubitClifford.named(tok.group(1))
            gates[q] = gates[q] @ g if q in gates else g
        if pos != len(body) and body not in ("I", ""):
            raise ValueError(f"cannot parse layer {text!r}")
        return cls(n, gates)

    @classmethod
    def from_pauli(cls, p: PhasedPauli) -> "CliffordLayer":
        return cls(p.n, {q: p.letter(q) for q in p.support})

    @classmethod
    def on(cls, n: int, qubits: Iterable[int], gate: str) -> "CliffordLayer":
        return cls(n, {q: gate for q in qubits})

    def gate(self, q: int) -> SingleQubitClifford:
        return self.gates.get(q, SingleQubitClifford(0))

    def __matmul__(self, other: "CliffordLayer") -> "CliffordLayer":
        if other.n != self.n:
            raise ValueError("qubit count mismatch")
        gates = {}
        for q in set(self.gates) | set(other.gates):
            gates[q] = self.gate(q) @ other.gate(q)
        return CliffordLayer(self.n, gates, self.phase + other.phase)

    def then(self, later: "CliffordLayer") -> "CliffordLayer":
        """Time-ordered composition: ``self`` first, ``later`` second."""
        return later @ self

    def inverse(self) -> "CliffordLayer":
        return CliffordLayer(self.n, {q: g.inverse() for q, g in self.gates.items()}, -self.phase)

    def is_identity(self, up_to_phase: bool = True) -> bool:
        return not self.gates and (up_to_phase or self.phase == 0)

    def is_pauli(self) -> bool:
        return all(g.is_pauli for g in self.gates.values())

    def embed(self, n_total: int) -> "CliffordLayer":
        return CliffordLayer(n_total, self.gates, self.phase)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CliffordLayer)
            and self.n == other.n
            and self.gates == other.gates
            and self.phase == other.phase
        )

    def equal_up_to_phase(self, other: "CliffordLayer") -> bool:
        return self.n == other.n and self.gates == other.gates

    def __hash__(self):
        return hash((self.n, tuple(self.gates.items()), self.phase))

    def conjugate_pauli(self, p: PhasedPauli) -> PhasedPauli:
        """``U p U†`` with exact sign."""
        x = p.x
        z = p.z
        sign = 0
        for q, g in self.gates.items():
            letter = p.letter(q)
            if letter == "I":
                continue
            s, img = g.images["XYZ".index(letter)]
            if s < 0:
                sign += 2
            bx, bz = _BITS[img]
            x = (x & ~(1 << q)) | (bx << q)
            z = (z & ~(1 << q)) | (bz << q)
        return PhasedPauli(p.n, x, z, p.phase + sign)

    def conjugate(self, target: WeightedPauliSum) -> WeightedPauliSum:
        if target.n != self.n:
            raise ValueError("qubit count mismatch")
        if not self.gates:
            return target
        out = {}
        for (x, z, a, q), c in target.raw_items():
            img = self.conjugate_pauli(PhasedPauli(self.n, x, z))
            out[(img.x, img.z, a, q)] = -c if img.phase == 2 else c
        return WeightedPauliSum(self.n, out, _trusted=True)

    def to_matrix(self) -> np.ndarray:
        out = np.array([[_OMEGA ** self.phase]], dtype=complex)
        for q in range(self.n):
            out = np.kron(out, self.gate(q).matrix())
        return out

    def to_json(self) -> dict:
        d = {"gates": [{"qubit": q + 1, "gate": g.name} for q, g in self.gates.items()]}
        if self.phase:
            d["phase"] = self.phase
        return d

    @classmethod
    def from_json(cls, n: int, data: dict) -> "CliffordLayer":
        gates = {g["qubit"] - 1: SingleQubitClifford.named(g["gate"]) for g in data.get("gates", [])}
        # named() may carry the word's own phase; the stored phase is the total
        layer = cls(n, gates)
        return cls(n, layer.gates, data.get("phase", 0))

    def __str__(self) -> str:
        if not self.gates:
            return "I"
        return " ".join(f"{g.name}{q + 1}" if "*" not in g.name else f"({g.name}){q + 1}" for q, g in self.gates.items())

    def __repr__(self) -> str:
        return f"CliffordLayer({self})"


# --------------------------------------------------------------------------
# Pauli exponentials
# --------------------------------------------------------------------------


class PauliExponential:
    """The unitary ``exp(-i θ A)`` for a sum ``A`` of mutually commuting Paulis."""

    __slots__ = ("axis", "theta")

    def __init__(self, axis: WeightedPauliSum, theta: float):
        if axis.grades() - {(0, 0)}:
            raise ValueError("exponential axis must be ungraded")
        paulis = axis.paulis()
        for i, p in enumerate(paulis):
            for q in paulis[i + 1:]:
                if not p.commutes(q):
                    raise ValueError(f"axis terms {p} and {q} do not commute")
        self.axis = axis
        self.theta = float(theta)

    @property
    def n(self) -> int:
        return self.axis.n

    def inverse(self) -> "PauliExponential":
        return PauliExponential(self.axis, -self.theta)

    def embed(self, n_total: int) -> "PauliExponential":
        return PauliExponential(self.axis.embed(n_total), self.theta)

    def _quarter_turns(self, c) -> float:
        """2θc in units of π/2."""
        return 2 * self.theta * float(c) / (math.pi / 2)

    def is_exact(self) -> bool:
        return all(abs(v - round(v)) < 1e-12 for v in (self._quarter_turns(c) for _, c in self.axis.raw_items()))

    def is_identity(self) -> bool:
        """True when the exponential acts trivially by conjugation."""
        return all(abs(v / 2 - round(v / 2)) < 1e-12 for v in (self._quarter_turns(c) for _, c in self.axis.raw_items()))

    def conjugate(self, target: WeightedPauliSum) -> WeightedPauliSum:
        """``U target U†`` applied term by term of the axis."""
        out = target
        for (ax, az, _, _), c in self.axis.raw_items():
            qt = self._quarter_turns(c)
            k = round(qt)
            if abs(qt - k) < 1e-12:
                cs, sn = ((1, 0), (0, 1), (-1, 0), (0, -1))[k % 4]
            else:
                phi = qt * math.pi / 2
                cs, sn = math.cos(phi), math.sin(phi)
            acc: dict = {}
            for (x, z, a, q), v in out.raw_items():
                if not _anticommute(ax, az, x, z):
                    acc[(x, z, a, q)] = acc.get((x, z, a, q), 0) + v
                    continue
                kk = _product_phase(ax, az, x, z)
                s = -1 if (kk + 1) % 4 == 0 else 1
                if cs:
                    acc[(x, z, a, q)] = acc.get((x, z, a, q), 0) + cs * v
                if sn:
                    key = (ax ^ x, az ^ z, a, q)
                    acc[key] = acc.get(key, 0) + s * sn * v
            out = WeightedPauliSum(out.n, {k2: v for k2, v in acc.items() if v != 0}, _trusted=True)
        return out

    def to_matrix(self) -> np.ndarray:
        h = self.axis.to_matrix()
        w, v = np.linalg.eigh(h)
        return (v * np.exp(-1j * self.theta * w)) @ v.conj().T

    def to_json(self) -> dict:
        return {"axis": self.axis.to_json(), "theta": self.theta}

    @classmethod
    def from_json(cls, n: int, data: dict) -> "PauliExponential":
        return cls(WeightedPauliSum.from_json(n, data["axis"]), data["theta"])

    def __repr__(self) -> str:
        return f"PauliExponential(theta={self.theta}, axis={self.axis})"


def conjugate(pulse, target: WeightedPauliSum) -> WeightedPauliSum:
    """``u · target · u†`` for a Clifford layer or a Pauli exponential."""
    if isinstance(pulse, (CliffordLayer, PauliExponential)):
        return pulse.conjugate(target)
    raise TypeError(f"cannot conjugate by {type(pulse).__name__}")


# --------------------------------------------------------------------------
# GF(2) utilities: span membership and normalizers
# --------------------------------------------------------------------------


def _vec(p: PhasedPauli) -> int:
    return p.x | (p.z << p.n)


def _reduce_basis(vectors: Iterable[int]) -> dict:
    """Echelon basis keyed by pivot bit."""
    basis: dict = {}
    for v in vectors:
        while v:
            top = v.bit_length() - 1
            if top in basis:
                v ^= basis[top]
            else:
                basis[top] = v
                break
    return basis


def gf2_rank(paulis: Iterable[PhasedPauli]) -> int:
    return len(_reduce_basis(_vec(p) for p in paulis))


def _check_commuting(gens: list[PhasedPauli]) -> None:
    for i, g in enumerate(gens):
        for h in gens[i + 1:]:
            if not g.commutes(h):
                raise ValueError(f"generators {g} and {h} do not commute")


def span_contains(generators: Iterable[PhasedPauli], p: PhasedPauli) -> bool:
    """True iff ``p`` is, up to phase, a product of the generators."""
    gens = list(generators)
    _check_commuting(gens)
    basis = _reduce_basis(_vec(g) for g in gens)
    v = _vec(p)
    while v:
        top = v.bit_length() - 1
        if top not in basis:
            return False
        v ^= basis[top]
    return True


NORMALIZER_QUBIT_CAP = 16
NORMALIZER_SIZE_CAP = 1 << 22


def normalizer(generators: Iterable[PhasedPauli], n: int | None = None) -> list[PhasedPauli]:
    """All phase-free Paulis commuting with every generator, in canonical order.

    The result has ``4**n / 2**m`` elements for ``m`` independent generators.
    """
    gens = list(generators)
    if n is None:
        if not gens:
            raise ValueError("qubit count needed for an empty generator list")
        n = gens[0].n
    if any(g.n != n for g in gens):
        raise ValueError("qubit count mismatch")
    if n > NORMALIZER_QUBIT_CAP:
        raise ValueError(f"normalizer enumeration capped at {NORMALIZER_QUBIT_CAP} qubits")
    _check_commuting(gens)
    if gf2_rank(gens) < len(gens):
        raise ValueError("generators are not independent")
    dim = 2 * n - len(gens)
    if 1 << dim > NORMALIZER_SIZE_CAP:
        raise ValueError(f"normalizer has 2^{dim} elements, above the enumeration cap")
    # constraint rows: <v, g> = 0 with v = x | z<<n  <=>  v . (g.z | g.x<<n) = 0
    rows = [g.z | (g.x << n) for g in gens]
    null = _gf2_nullspace(rows, 2 * n)
    vecs = np.zeros(1, dtype=np.uint64)
    for b in null:
        vecs = np.concatenate([vecs, vecs ^ np.uint64(b)])
    mask = (1 << n) - 1
    out = [PhasedPauli(n, int(v) & mask, int(v) >> n) for v in vecs.tolist()]
    out.sort(key=lambda p: (_bitrev(p.z, n), _bitrev(p.x, n)))
    return out


def _gf2_nullspace(rows: list[int], nbits: int) -> list[int]:
    """Basis of {v : popcount(v & r) even for all r}."""
    pivots: list[tuple[int, int]] = []  # (pivot bit, row) in reduced form
    for r in rows:
        for bit, pr in pivots:
            if r >> bit & 1:
                r ^= pr
        if r:
            bit = r.bit_length() - 1
            pivots = [(b, pr ^ r if pr >> bit & 1 else pr) for b, pr in pivots]
            pivots.append((bit, r))
    pivot_bits = {b for b, _ in pivots}
    basis = []
    for free in range(nbits):
        if free in pivot_bits:
            continue
        v = 1 << free
        for bit, pr in pivots:
            if pr >> free & 1:
                v |= 1 << bit
        basis.append(v)
    return basis
