"""Dense numerical ground truth for compiled schedules.

Everything here works with explicit ``2^n x 2^n`` matrices.  System qubits
come first (most significant in the Kronecker order) and an optional finite
bath register follows.  Spectral norms use a full SVD; the register is capped
at :data:`MAX_DENSE_QUBITS` qubits.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar
from scipy.stats import linregress

from .lattice import CodeLayout, GridLayout, build_system_hamiltonian, classify_error
from .pauli import PhasedPauli, WeightedPauliSum, _bitrev
from .schedule import Evolve, PauliRotation, Pulse, PulseSchedule

__all__ = [
    "MAX_DENSE_QUBITS",
    "ResourceCapError",
    "BranchCutError",
    "NoiseFloorError",
    "BathModel",
    "DenseUnitary",
    "EffectiveReport",
    "ScalingFit",
    "SuppressionReport",
    "ErrorCatalog",
    "simulate_dense",
    "extract_generator",
    "pauli_decompose",
    "spectral_norm",
    "phase_optimized_distance",
    "fit_scaling",
    "effective_report",
    "residual_sweep",
    "lambda_polynomial",
    "eta",
    "eta_bound",
    "suppression_sweep",
    "catalog_error_terms",
    "deformation_reference",
    "trotter_sweep",
]

MAX_DENSE_QUBITS = 14
NOISE_FLOOR = 1e-14
UNITARITY_TOL = 1e-10


class ResourceCapError(RuntimeError):
    """The dense register would exceed :data:`MAX_DENSE_QUBITS`."""


class BranchCutError(ValueError):
    """An eigenphase sits on the branch cut of the principal logarithm."""


class NoiseFloorError(ValueError):
    """Residuals are too close to float round-off for a meaningful fit."""


def _check_cap(n: int) -> None:
    if n > MAX_DENSE_QUBITS:
        raise ResourceCapError(f"{n} qubits exceed the dense cap of {MAX_DENSE_QUBITS}")


def spectral_norm(m: np.ndarray) -> float:
    return float(sla.svdvals(m)[0]) if m.size else 0.0


# --------------------------------------------------------------------------
# bath model


def _shift(op: WeightedPauliSum, offset: int, n_total: int) -> WeightedPauliSum:
    return WeightedPauliSum(n_total, {(x << offset, z << offset, a, q): c for (x, z, a, q), c in op.raw_items()})


@dataclass
class BathModel:
    """Finite qubit bath with ``H_SB = Σ σ_i^α ⊗ B_i^α``.

    ``H_B`` and the ``B_i^α`` live on the ``n_bath``-qubit bath register and
    are placed after the system qubits when embedded.  ``r`` and ``r_prime``
    are optional locality radii: coupling operators at system distance
    ``> r`` commute, and no single ``H_B`` term acts nontrivially on coupling
    operators of two sites further than ``r_prime`` apart.
    """

    n_bath: int
    H_B: WeightedPauliSum
    couplings: list = field(default_factory=list)
    lam: float = 0.1
    r: float | None = None
    r_prime: float | None = None

    def __post_init__(self):
        if self.H_B.n != self.n_bath:
            raise ValueError("H_B must act on the bath register")
        for i, alpha, b in self.couplings:
            if alpha not in "XYZ" or len(alpha) != 1:
                raise ValueError(f"coupling axis must be X, Y or Z, got {alpha!r}")
            if b.n != self.n_bath:
                raise ValueError("bath operators must act on the bath register")

    def h_b(self, n_sys: int) -> WeightedPauliSum:
        return _shift(self.H_B, n_sys, n_sys + self.n_bath)

    def bath_operator(self, n_sys: int, k: int) -> WeightedPauliSum:
        return _shift(self.couplings[k][2], n_sys, n_sys + self.n_bath)

    def h_sb(self, n_sys: int) -> WeightedPauliSum:
        """Coupling Hamiltonian on the joint register, graded with one power of λ."""
        n = n_sys + self.n_bath
        out = WeightedPauliSum.zero(n)
        for i, alpha, b in self.couplings:
            if i >= n_sys:
                raise ValueError(f"coupling on qubit {i} outside the {n_sys}-qubit system")
            sig = PhasedPauli.single(n, i, alpha)
            for t in b:
                p = sig * PhasedPauli(n, t.pauli.x << n_sys, t.pauli.z << n_sys)
                out = out + WeightedPauliSum.from_pauli(p, t.coeff, t.dt_power, t.lam_power + 1)
        return out

    def environment(self, n_sys: int, lambda_value: float | None = None) -> WeightedPauliSum:
        """``H_B + λ H_SB`` with λ substituted."""
        lam = self.lam if lambda_value is None else lambda_value
        return (self.h_b(n_sys) + self.h_sb(n_sys)).evaluate(1.0, lam)

    def measured_radii(self, grid: GridLayout) -> tuple[float, float]:
        """Largest site distances at which coupling operators (or an ``H_B`` term) still act jointly."""
        r = 0.0
        for (i, _, bi), (j, _, bj) in itertools.combinations(self.couplings, 2):
            if i != j and not bi.commutes_with(bj):
                r = max(r, grid.distance(i, j))
        rp = 0.0
        for t in self.H_B:
            hb = WeightedPauliSum.from_pauli(t.pauli)
            touched = sorted({i for i, _, b in self.couplings if not b.commutes_with(hb)})
            for i, j in itertools.combinations(touched, 2):
                rp = max(rp, grid.distance(i, j))
        return r, rp

    def check_radii(self, grid: GridLayout) -> tuple[float, float]:
        r, rp = self.measured_radii(grid)
        if self.r is not None and r > self.r + 1e-12:
            raise ValueError(f"declared r={self.r} but coupling operators at distance {r:.4g} fail to commute")
        if self.r_prime is not None and rp > self.r_prime + 1e-12:
            raise ValueError(f"declared r'={self.r_prime} but an H_B term links sites {rp:.4g} apart")
        return r, rp

    @classmethod
    def random(cls, n_sys: int, n_bath: int = 1, lam: float = 0.1, rng=None, hb_scale: float = 1.0) -> "BathModel":
        """Random 1-local couplings with Gaussian coefficients on every bath Pauli."""
        rng = np.random.default_rng(rng)
        bath_paulis = [PhasedPauli(n_bath, x, z) for x in range(1 << n_bath) for z in range(1 << n_bath) if x | z]
        def rand_sum(scale):
            return WeightedPauliSum.from_terms(n_bath, [(p, float(scale * rng.normal())) for p in bath_paulis])
        couplings = [(i, a, rand_sum(1.0)) for i in range(n_sys) for a in "XYZ"]
        return cls(n_bath, rand_sum(hb_scale), couplings, lam)

    @classmethod
    def lattice(cls, grid: GridLayout, lam: float = 0.1) -> "BathModel":
        """One bath qubit per site with short-range couplings.

        ``B_i^α = τ^α_i Z_{i'}`` where ``i'`` is the diagonal neighbour
        down-right of ``i`` (if any); ``H_B`` holds ``Z Z`` on nearest-neighbour
        bath pairs and a transverse ``X`` on each bath qubit.  The radii are
        ``r = r' = √2``.
        """
        n = grid.n
        couplings = []
        for q in range(n):
            r, c = grid.coords(q)
            tail = [grid.index(r + 1, c + 1)] if r + 1 < grid.rows and c + 1 < grid.cols else []
            for a in "XYZ":
                p = PhasedPauli.single(n, q, a)
                for t in tail:
                    p = p * PhasedPauli.single(n, t, "Z")
                couplings.append((q, a, WeightedPauliSum.from_pauli(p)))
        nearest = GridLayout(grid.rows, grid.cols, "nearest", grid.periodic)
        hb = [(PhasedPauli.single(n, a, "Z") * PhasedPauli.single(n, b, "Z"), 1.0) for a, b in nearest.edges()]
        hb += [(PhasedPauli.single(n, q, "X"), 0.5) for q in range(n)]
        return cls(n, WeightedPauliSum.from_terms(n, hb), couplings, lam, math.sqrt(2), math.sqrt(2))


# --------------------------------------------------------------------------
# dense simulation


@dataclass
class DenseUnitary:
    matrix: np.ndarray
    n_sys: int
    n_bath: int = 0
    time: float = 0.0

    def __post_init__(self):
        d = self.matrix.shape[0]
        err = np.linalg.norm(self.matrix.conj().T @ self.matrix - np.eye(d), 2) if d else 0.0
        if err > UNITARITY_TOL:
            raise ValueError(f"matrix is not unitary (deviation {err:.2e})")

    @property
    def n(self) -> int:
        return self.n_sys + self.n_bath

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def _expm_herm(h: np.ndarray, t: float) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def simulate_dense(s: PulseSchedule, bath: BathModel | None = None, dt_value: float = 1e-2,
                   lambda_value: float | None = None) -> DenseUnitary:
    """Ordered product of every pulse and segment exponential.

    Durations of non-absolute evolutions are multiplied by ``dt_value``.  With
    a bath, every ``Evolve`` runs under ``H + H_B + λ H_SB``; rotations and
    pulses act on the system only.
    """
    n_sys = s.n_qubits
    n_bath = bath.n_bath if bath else 0
    n = n_sys + n_bath
    _check_cap(n)
    lam = (bath.lam if bath else 1.0) if lambda_value is None else lambda_value
    env = bath.environment(n_sys, lam).to_matrix() if bath else None
    d = 1 << n
    cache: dict = {}

    def ham(name):
        if name not in cache:
            h = s.hamiltonians[name].embed(n).to_matrix(dt_value, lam)
            if env is not None:
                h = h + env
            cache[name] = np.linalg.eigh(h)
        return cache[name]

    u = np.eye(d, dtype=complex)
    t_total = 0.0
    for ev in s.events:
        if isinstance(ev, Pulse):
            u = ev.op.embed(n).to_matrix() @ u
        elif isinstance(ev, PauliRotation):
            theta = float(ev.angle) * dt_value ** ev.dt_power
            u = _expm_herm(ev.axis.embed(n).to_matrix(dt_value, lam), theta) @ u
        elif isinstance(ev, Evolve):
            t = float(ev.duration) * (1.0 if ev.absolute else dt_value)
            w, v = ham(ev.hamiltonian)
            u = ((v * np.exp(-1j * t * w)) @ v.conj().T) @ u
            t_total += t
    return DenseUnitary(u, n_sys, n_bath, t_total)


# --------------------------------------------------------------------------
# generator extraction


def _wht(a: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis."""
    a = a.copy()
    d = a.shape[-1]
    h = 1
    while h < d:
        a = a.reshape(*a.shape[:-1], d // (2 * h), 2, h)
        lo, hi = a[..., 0, :].copy(), a[..., 1, :].copy()
        a[..., 0, :] = lo + hi
        a[..., 1, :] = lo - hi
        a = a.reshape(*a.shape[:-3], d)
        h *= 2
    return a


def pauli_decompose(m: np.ndarray, tol: float = 0.0) -> WeightedPauliSum:
    """Real Pauli coefficients ``tr(P m) / 2^n`` of a Hermitian matrix."""
    d = m.shape[0]
    n = d.bit_length() - 1
    if 1 << n != d:
        raise ValueError("matrix dimension is not a power of two")
    idx = np.arange(d)
    # gathered[xm, i] = m[i ^ xm, i]; its WHT over i gives Σ_i (-1)^{z·i} m[i^x, i]
    gathered = m[idx[:, None] ^ idx[None, :], idx[None, :]]
    spectrum = _wht(gathered) / d
    ycount = np.bitwise_count(idx[:, None] & idx[None, :]).astype(np.int64) % 4
    coeffs = (spectrum * (-1j) ** ycount).real
    terms = {}
    for xm, zm in zip(*np.nonzero(np.abs(coeffs) > tol)):
        terms[(_bitrev(int(xm), n), _bitrev(int(zm), n), 0, 0)] = float(coeffs[xm, zm])
    return WeightedPauliSum(n, terms)


def _log_unitary(u: np.ndarray, branch_tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """``(K, φ)`` with ``u = e^{iφ} exp(-i K)``, ``K`` Hermitian and traceless-phase-free."""
    tr = np.trace(u)
    phi = float(np.angle(tr)) if abs(tr) > 1e-12 else 0.0
    w = u * np.exp(-1j * phi)
    t, z = sla.schur(w, output="complex")
    lam = np.diag(t)
    ang = np.angle(lam)
    if np.any(np.abs(ang) > math.pi - branch_tol):
        raise BranchCutError("an eigenvalue lies on the branch cut at -1")
    k = (z * -ang) @ z.conj().T
    return (k + k.conj().T) / 2, phi


def extract_generator(u, T: float, tol: float = 0.0) -> tuple[WeightedPauliSum, float]:
    """``H`` with ``u = exp(-i H T)`` on the principal branch.

    Returns the traceless part as a Pauli sum and the identity coefficient
    separately (it carries the global phase).
    """
    m = np.asarray(u)
    if T <= 0:
        raise ValueError("duration must be positive")
    k, phi = _log_unitary(m)
    h = pauli_decompose(k / T, tol)
    ident = h.coeff(PhasedPauli.identity(h.n)) - phi / T
    return h - WeightedPauliSum.from_pauli(PhasedPauli.identity(h.n), h.coeff(PhasedPauli.identity(h.n))), float(ident)


def phase_optimized_distance(u, v) -> tuple[float, float]:
    """``(min_φ ‖u - e^{iφ} v‖, φ*)`` in spectral norm."""
    u, v = np.asarray(u), np.asarray(v)
    phi0 = float(np.angle(np.trace(v.conj().T @ u)))
    f = lambda p: spectral_norm(u - np.exp(1j * p) * v)
    best = (f(phi0), phi0)
    res = minimize_scalar(f, bounds=(phi0 - 0.5, phi0 + 0.5), method="bounded", options={"xatol": 1e-13})
    if res.fun < best[0]:
        best = (float(res.fun), float(res.x))
    return best


# --------------------------------------------------------------------------
# scaling fits


class ScalingFit(NamedTuple):
    exponent: float
    intercept: float
    r2: float
    stderr: float

    def interval(self, z: float = 1.96) -> tuple[float, float]:
        return self.exponent - z * self.stderr, self.exponent + z * self.stderr


def fit_scaling(sweep: Iterable[tuple[float, float]], noise_floor: float = NOISE_FLOOR) -> ScalingFit:
    """Least-squares slope of ``log residual`` against ``log parameter``."""
    pts = sorted((float(a), float(b)) for a, b in sweep)
    if len(pts) < 4:
        raise ValueError("need at least four sweep points")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.any(x <= 0):
        raise ValueError("sweep parameters must be positive")
    if np.any(y <= 10 * noise_floor):
        raise NoiseFloorError(f"residual {y.min():.2e} is within 10x of the noise floor {noise_floor:.0e}")
    fit = linregress(np.log(x), np.log(y))
    return ScalingFit(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2), float(fit.stderr))


# --------------------------------------------------------------------------
# effective generator vs a declared target


@dataclass
class EffectiveReport:
    """Extracted exponent of one simulated cycle at a fixed δt.

    ``generator`` is the Pauli decomposition of ``H`` with ``U = e^{-iHT}``;
    ``residual_norm`` is ``‖H T - Ω_target‖`` in spectral norm.
    """

    dt_value: float
    time: float
    generator: WeightedPauliSum
    identity_coeff: float
    residual_norm: float | None = None
    fit: ScalingFit | None = None
    eta: float | None = None

    def exponent(self) -> WeightedPauliSum:
        return self.generator * self.time

    def coefficient(self, pauli) -> float:
        return float(self.generator.coeff(pauli)) * self.time

    def to_json(self) -> dict:
        return {
            "dt": self.dt_value,
            "time": self.time,
            "identity_coeff": self.identity_coeff,
            "residual_norm": self.residual_norm,
            "generator": self.generator.chop(1e-15).to_json(),
            "fit": None if self.fit is None else self.fit._asdict(),
            "eta": self.eta,
        }


def effective_report(s: PulseSchedule, dt_value: float, target: WeightedPauliSum | None = None,
                     bath: BathModel | None = None, lambda_value: float | None = None) -> EffectiveReport:
    """Simulate one cycle and compare its exponent with ``target`` (default: the declared one)."""
    u = simulate_dense(s, bath, dt_value, lambda_value)
    t = u.time if u.time > 0 else 1.0
    k, phi = _log_unitary(u.matrix)
    if spectral_norm(k) >= math.pi:
        raise BranchCutError("exponent norm reaches π; the principal logarithm is not the cycle generator")
    gen = pauli_decompose(k / t)
    ident = gen.coeff(PhasedPauli.identity(gen.n))
    traceless = k - ident * t * np.eye(k.shape[0])
    gen = gen - WeightedPauliSum.from_pauli(PhasedPauli.identity(gen.n), ident)
    target = s.declared_target if target is None else target
    residual = None
    if target is not None:
        tm = target.embed(u.n).to_matrix(dt_value, 1.0 if lambda_value is None else lambda_value)
        tm = tm - np.trace(tm) / tm.shape[0] * np.eye(tm.shape[0])
        residual = spectral_norm(traceless - tm)
    return EffectiveReport(dt_value, t, gen, float(ident - phi / t), residual)


def residual_sweep(s: PulseSchedule, dt_values: Sequence[float], target: WeightedPauliSum | None = None,
                   bath: BathModel | None = None, lambda_value: float | None = None,
                   mapper: Callable = map) -> tuple[list[EffectiveReport], ScalingFit | None]:
    """Reports at each δt and the log-log slope of the residual (``None`` if at the noise floor)."""
    reports = list(mapper(lambda dt: effective_report(s, dt, target, bath, lambda_value), dt_values))
    try:
        fit = fit_scaling([(r.dt_value, r.residual_norm) for r in reports])
    except NoiseFloorError:
        fit = None
    for r in reports:
        r.fit = fit
    return reports, fit


def lambda_polynomial(s: PulseSchedule, bath: BathModel, dt_value: float, lambda_value: float,
                      reference: WeightedPauliSum | None = None) -> dict:
    """Linear and quadratic λ-coefficients of the exponent deviation at fixed δt.

    The deviation ``D(λ) = H T - (H_X + H_B) T`` is sampled at ``λ ∈ {-λ, 0, λ}``
    and split by central differences; returns spectral norms of both parts.
    """
    n = s.n_qubits + bath.n_bath
    if reference is None:
        reference = s.hamiltonians["system"].embed(n) + bath.h_b(s.n_qubits)

    def dev(lam):
        u = simulate_dense(s, bath, dt_value, lam)
        k, _ = _log_unitary(u.matrix)
        ref = reference.to_matrix(dt_value, lam) * u.time
        diff = k - ref
        return diff - np.trace(diff) / diff.shape[0] * np.eye(diff.shape[0])

    dp, d0, dm = dev(lambda_value), dev(0.0), dev(-lambda_value)
    lin = (dp - dm) / (2 * lambda_value)
    quad = (dp + dm - 2 * d0) / (2 * lambda_value ** 2)
    a1, a2 = spectral_norm(lin), spectral_norm(quad)
    return {"dt": dt_value, "lambda": lambda_value, "linear": a1, "quadratic": a2,
            "ratio": a1 / a2 if a2 else math.inf, "lambda0": spectral_norm(d0)}


# --------------------------------------------------------------------------
# effective noise strength


def eta(s: PulseSchedule, bath: BathModel, dt_value: float, lambda_value: float | None = None,
        raw: bool = False) -> float:
    """``‖U - e^{-i(H_B + H_X) T}‖`` for one cycle, phase-optimized unless ``raw``."""
    u = simulate_dense(s, bath, dt_value, lambda_value)
    n = u.n
    h0 = s.hamiltonians["system"].embed(n).to_matrix(dt_value, 0.0) + bath.h_b(s.n_qubits).to_matrix()
    ideal = _expm_herm(h0, u.time)
    if raw:
        return spectral_norm(u.matrix - ideal)
    return phase_optimized_distance(u.matrix, ideal)[0]


def eta_bound(params: dict, norms: dict, n_dd: int, dt_value: float, lambda_value: float) -> dict:
    """Parametric bounds on the second- and higher-order effective terms.

    ``params`` holds ``c0..c3``; ``norms`` holds ``hsb`` (``‖H_SB‖``) and
    ``hbx`` (``‖H_B + H_X‖``).  ``eta`` is ``N δt`` times the sum of both.
    """
    c0, c1, c2, c3 = (float(params[k]) for k in ("c0", "c1", "c2", "c3"))
    hsb, hbx = float(norms["hsb"]), float(norms["hbx"])
    if hsb < 0 or hbx < 0:
        raise ValueError("norms must be nonnegative")
    nt = n_dd * dt_value
    lh = lambda_value * hsb
    second = nt ** 2 * lambda_value ** 2 * hsb ** 2 * (c0 * lh + c1 * hbx)
    higher = nt ** 3 * lh * (lh + hbx) ** 3 * (c2 + c3 * (lh + hbx) * nt)
    return {"second_order": second, "higher_order": higher, "sum": second + higher, "eta": nt * (second + higher)}


# --------------------------------------------------------------------------
# energy-gap suppression


@dataclass
class SuppressionReport:
    h: float
    g: float
    k: int
    dt_value: float
    delta_t: float
    deviation: float
    F_norm: float
    F_norm_end: float
    leakage: float
    classification: list
    coefficient_shift: float | None = None
    shift_residual: float | None = None
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.deviation < 0 or not math.isfinite(self.F_norm):
            raise ValueError("invalid suppression data")

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["classification"] = [list(c) for c in self.classification]
        return d


def _codespace_projector(code: CodeLayout, n_total: int) -> np.ndarray:
    d = 1 << n_total
    p = np.eye(d, dtype=complex)
    for g in code.generators:
        p = p @ (np.eye(d) + g.embed(n_total).to_matrix()) / 2
    return p


def suppression_sweep(code: CodeLayout, bath: BathModel | None, h_values: Sequence[float], g: float, k: int,
                      V: WeightedPauliSum, dt_value: float = 1.0, delta_t: float = 1.0,
                      time_points: int = 2001) -> list[SuppressionReport]:
    """Evolve under ``h H_p + H_B/δt² - g V`` for ``k Δt`` and measure the codespace deviation.

    ``F_norm`` is the largest ``‖F(t)‖`` on a uniform grid of ``time_points``
    instants in ``[0, k Δt]``; ``F_norm_end`` is its value at ``k Δt``.
    ``V`` may act on the system only or on system plus bath.
    """
    n_sys = code.n
    n_bath = bath.n_bath if bath else 0
    n = n_sys + n_bath
    _check_cap(n)
    if V.n not in (n_sys, n):
        raise ValueError("V acts outside the system and bath registers")
    v_sum = V.embed(n).evaluate(dt_value, 1.0)
    classes = []
    for t in v_sum:
        sys_part = PhasedPauli(n_sys, t.pauli.x & ((1 << n_sys) - 1), t.pauli.z & ((1 << n_sys) - 1))
        c = classify_error(code, sys_part)
        classes.append((str(t.pauli), c.kind, c.c))
    detectable = {c[1] for c in classes} == {"detectable"}
    stabilizer_only = {c[1] for c in classes} == {"stabilizer-element"}
    vm = v_sum.to_matrix()
    hp = code.penalty_hamiltonian().embed(n).to_matrix()
    hb = bath.h_b(n_sys).to_matrix() / dt_value ** 2 if bath else np.zeros_like(hp)
    proj = _codespace_projector(code, n)
    total_t = k * delta_t
    eps0 = code.epsilon0
    ts = np.linspace(0.0, total_t, time_points)
    out = []
    for h in h_values:
        h0 = h * hp + hb
        w, vecs = np.linalg.eigh(h0)
        u_ideal = (vecs * np.exp(-1j * w * total_t)) @ vecs.conj().T
        u = _expm_herm(h0 - g * vm, total_t)
        deviation = spectral_norm((u - u_ideal) @ proj)
        leakage = spectral_norm((np.eye(proj.shape[0]) - proj) @ u @ proj)
        # F(t) = ∫ U_P† (-g V) U_P dτ P in the eigenbasis of the base Hamiltonian
        vi = vecs.conj().T @ (-g * vm) @ vecs
        pe = vecs.conj().T @ proj @ vecs
        omega = w[:, None] - w[None, :]
        small = np.abs(omega) < 1e-12
        safe = np.where(small, 1.0, omega)

        def f_at(t):
            kern = np.where(small, t, (np.exp(1j * omega * t) - 1) / (1j * safe))
            return spectral_norm((vi * kern) @ pe)

        f_vals = [f_at(t) for t in ts]
        shift = resid = None
        if stabilizer_only:
            resid, phi = phase_optimized_distance(u @ proj, u_ideal @ proj)
            # U_ideal(h + δh) P = e^{-i δh ε0 t} U_ideal(h) P
            shift = float(-phi / (eps0 * total_t)) if eps0 else None
        notes = []
        if bath is not None:
            notes.append("bath Hamiltonian scaled literally by 1/δt²")
        out.append(SuppressionReport(
            float(h), float(g), int(k), float(dt_value), float(delta_t), deviation, float(max(f_vals)),
            float(f_vals[-1]), leakage, classes, shift, resid, notes,
        ))
        if detectable:
            out[-1].notes.append("all V terms detectable")
    return out


# --------------------------------------------------------------------------
# effective-noise catalog


@dataclass
class ErrorCatalog:
    m: int
    q: int
    k_local: int
    l_local: int
    n_dd: int
    n_sites: int
    locality_bound: int
    count_bound: int
    r: float | None = None
    r_prime: float | None = None
    terms: dict | None = None
    violations: list = field(default_factory=list)

    @property
    def count(self) -> int | None:
        return None if self.terms is None else len(self.terms)

    def spread_bound(self, b: int = 0, n_x: int | None = None, edge: float = 0.0) -> float | None:
        return _spread_bound(self.q, b, self.m - self.q - b if n_x is None else n_x, self.r, self.r_prime, edge)

    def to_json(self) -> dict:
        return {
            "m": self.m, "q": self.q, "k": self.k_local, "l": self.l_local, "n_dd": self.n_dd,
            "n_sites": self.n_sites, "locality_bound": self.locality_bound, "count_bound": self.count_bound,
            "r": self.r, "r_prime": self.r_prime, "count": self.count,
            "terms": None if self.terms is None else [
                {"pauli": p, "weight": w, "diameter": dmt, "min_b": b} for p, (w, dmt, b) in sorted(self.terms.items())
            ],
            "violations": self.violations,
        }


def _locality_bound(m: int, q: int, k: int, l: int, b: int = 0) -> int:
    if q == 0:
        return (m - b) * (k - 1) + 1
    return q * l + (m - q - b) * (k - 1)


def _spread_bound(q: int, b: int, n_x: int, r, r_prime, edge: float) -> float | None:
    """Largest support diameter: ``q - 1`` bath links (``b`` of them through ``H_B``) plus ``H_X`` growth."""
    if q == 0:
        return n_x * edge
    if r is None or (b and r_prime is None):
        return None
    links = q - 1
    via_hb = min(b, links)
    return via_hb * max(r, r_prime or 0.0) + (links - via_hb) * r + n_x * edge


def catalog_error_terms(m: int, q: int, k_local: int = 2, l_local: int = 1, layout: GridLayout | None = None,
                        bath: BathModel | None = None, n_dd: int = 1, enumerate_terms: bool = False,
                        system_hamiltonian: WeightedPauliSum | None = None,
                        frame_invariant_h0: bool = True) -> ErrorCatalog:
    """Locality and count bounds for ``λ^q δt^m`` effective-noise terms.

    With ``enumerate_terms`` every ordered choice of ``m`` Pauli terms (``q``
    from ``H_SB``, the rest from ``H_X`` and ``H_B``) is nested left to right;
    surviving products are recorded with their system weight and diameter and
    checked against the bounds.

    When the DD frames commute with ``H_X`` (``frame_invariant_h0``), the
    toggled ``H_X + H_B`` is the same operator in every segment, so any nesting
    whose innermost commutator pairs two of its terms vanishes as a sum and is
    skipped.  In particular nothing survives at ``q = 0``.
    """
    if m < 1 or not 0 <= q <= m:
        raise ValueError("need m >= 1 and 0 <= q <= m")
    n_sites = layout.n if layout is not None else 0
    cat = ErrorCatalog(
        m, q, k_local, l_local, n_dd, n_sites, _locality_bound(m, q, k_local, l_local),
        n_dd ** m * (3 * n_sites) ** q,
        bath.r if bath else None, bath.r_prime if bath else None,
    )
    if not enumerate_terms:
        return cat
    if layout is None or bath is None:
        raise ValueError("enumeration needs a layout and a bath model")
    if bath.r is not None or bath.r_prime is not None:
        bath.check_radii(layout)
    n_sys = layout.n
    n = n_sys + bath.n_bath
    mask = (1 << n_sys) - 1
    hx = build_system_hamiltonian(layout) if system_hamiltonian is None else system_hamiltonian
    edge = max((layout.distance(a, b) for a, b in layout.edges()), default=0.0)
    pools = {
        "x": [(t.pauli.x, t.pauli.z) for t in hx.embed(n)],
        "b": [(t.pauli.x, t.pauli.z) for t in bath.h_b(n_sys)],
        "s": [(t.pauli.x, t.pauli.z) for t in bath.h_sb(n_sys)],
    }

    def anti(a, c):
        return ((a[0] & c[1]).bit_count() + (a[1] & c[0]).bit_count()) & 1

    terms: dict = {}
    kinds = [kk for kk in itertools.product("xbs", repeat=m) if kk.count("s") == q]
    if frame_invariant_h0:
        kinds = [kk for kk in kinds if m == 1 or "s" in kk[:2]]
    for kind in kinds:
        b = kind.count("b")
        bound_w = _locality_bound(m, q, k_local, l_local, b)
        bound_d = _spread_bound(q, b, m - q - b, cat.r, cat.r_prime, edge)
        # depth-first nesting with pruning on vanishing commutators
        stack = [(0, p) for p in pools[kind[0]]]
        while stack:
            depth, acc = stack.pop()
            if depth == m - 1:
                sx, sz = acc[0] & mask, acc[1] & mask
                support = sx | sz
                qubits = [i for i in range(n_sys) if support >> i & 1]
                w = len(qubits)
                dmt = layout.diameter(qubits) if qubits else 0.0
                label = str(PhasedPauli(n, acc[0], acc[1]))
                prev = terms.get(label)
                if prev is None or b < prev[2]:
                    terms[label] = (w, dmt, b)
                if w > bound_w or (bound_d is not None and dmt > bound_d + 1e-9):
                    cat.violations.append({"pauli": label, "kinds": "".join(kind), "weight": w, "diameter": dmt})
                continue
            for p in pools[kind[depth + 1]]:
                if anti(acc, p):
                    stack.append((depth + 1, (acc[0] ^ p[0], acc[1] ^ p[1])))
    cat.terms = terms
    return cat


# --------------------------------------------------------------------------
# Trotterized deformation


def deformation_reference(hamiltonian_at: Callable[[float], WeightedPauliSum], t1: float, n: int,
                          rtol: float = 1e-12, atol: float = 1e-13) -> np.ndarray:
    """Time-ordered evolution of ``H(t)`` over ``[0, t1]`` by a high-order ODE solve."""
    _check_cap(n)
    d = 1 << n
    h0, h1, hm = (hamiltonian_at(t).to_matrix() for t in (0.0, t1, t1 / 2))
    affine = np.allclose(hm, (h0 + h1) / 2, atol=1e-14)

    def rhs(t, y):
        h = h0 + (h1 - h0) * (t / t1) if affine else hamiltonian_at(t).to_matrix()
        return (-1j * h @ y.reshape(d, d)).ravel()

    sol = solve_ivp(rhs, (0.0, t1), np.eye(d, dtype=complex).ravel(), method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y[:, -1].reshape(d, d)


def trotter_sweep(build: Callable[[int], PulseSchedule], reference: np.ndarray, n_values: Sequence[int]) -> tuple[list, ScalingFit]:
    """Spectral-norm error of ``build(N)`` against ``reference`` and its slope in ``1/N``."""
    rows = []
    for n_tr in n_values:
        u = simulate_dense(build(n_tr), None, 1.0, 1.0)
        rows.append((1.0 / n_tr, spectral_norm(u.matrix - reference)))
    return rows, fit_scaling(rows)
