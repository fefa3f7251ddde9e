"""Spectral analysis of a channel's matrix representation.

``decompose`` produces ``M = S J S^-1`` with ``J`` block diagonal:

* peripheral eigenvalues (modulus within ``tol.unit`` of one), diagonal;
* non-zero contracting eigenvalues, diagonalised when the eigenvector basis
  is usable, otherwise kept in triangular Schur form;
* a numerically nilpotent tail (modulus below ``tol.nil``), triangular.

Blocks are obtained from one complex Schur form, reordered with ``trsen``
and decoupled with Sylvester solves, so the peripheral projector never
depends on an ill-conditioned eigenvector matrix.
"""

from __future__ import annotations

import enum
import math
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .linalg import DEFAULT_TOL, QMC, ComplexMatrix, SuperOperator, Tolerances, devectorize, vectorize

# Largest acceptable condition number for the contracting eigenvector basis.
_MAX_EIG_COND = 1e10
# ||T_N^n|| below this counts as zero when measuring the nilpotent index.
_NIL_ZERO = 1e-13


class DecompositionError(RuntimeError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3g})")
        self.residual = residual


class NotStableError(RuntimeError):
    """Raised when an operation needs a periodically stable chain."""


class TruncationUnavailable(RuntimeError):
    """No finite bound can be derived with the available data."""


@dataclass(frozen=True, eq=False)
class SpectralData:
    """``M = S J S^-1`` with ``J = diag(peripheral) (+) diag/tri(contracting) (+) T_N``.

    Index ranges into ``J``: ``[0, n_peripheral)`` peripheral,
    ``[n_peripheral, n_peripheral + n_contracting)`` non-zero contracting,
    the rest nilpotent.
    """

    matrix: ComplexMatrix = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    s: ComplexMatrix = field(repr=False)
    s_inv: ComplexMatrix = field(repr=False)
    j: ComplexMatrix = field(repr=False)
    n_peripheral: int
    n_contracting: int
    n_nilpotent: int
    peripheral_clusters: tuple[tuple[int, ...], ...]
    omega: float
    d_omega: int
    nil_index: int
    nil_tail: float
    contracting_diagonal: bool
    cond_number: float
    residual: float
    tol: Tolerances = field(repr=False, default=DEFAULT_TOL)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def peripheral_indices(self) -> tuple[int, ...]:
        return tuple(range(self.n_peripheral))

    @property
    def block_sizes(self) -> dict[str, int]:
        return {
            "peripheral": self.n_peripheral,
            "contracting": self.n_contracting,
            "nilpotent": self.n_nilpotent,
        }

    @property
    def spectral_radius(self) -> float:
        return float(np.abs(self.eigenvalues).max())

    def peripheral_coefficients(self, v: np.ndarray) -> np.ndarray:
        return self.s_inv[: self.n_peripheral] @ v

    def peripheral_component(self, coeffs: np.ndarray) -> np.ndarray:
        return self.s[:, : self.n_peripheral] @ coeffs


class Stability(enum.Enum):
    STABLE = "stable"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class PeripheralPhase:
    eigen_index: int
    phase: float
    rational: tuple[int, int] | None
    weight: float = 0.0

    @property
    def eigenvalue(self) -> complex:
        return complex(np.exp(2j * np.pi * self.phase))


@dataclass(frozen=True)
class StabilityReport:
    stable: Stability
    period: int | None
    contributing_phases: tuple[PeripheralPhase, ...]
    witness: str = ""

    @property
    def is_stable(self) -> bool:
        return self.stable is Stability.STABLE

    def require_stable(self) -> None:
        if not self.is_stable:
            raise NotStableError(f"chain is not known to be periodically stable: {self.witness}")


# --- Schur reordering and block decoupling ---------------------------------


def _reorder(t: np.ndarray, z: np.ndarray, select: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Move the selected eigenvalues to the leading block, preserving their order."""
    if select.all() or not select.any():
        return t, z, int(select.sum())
    ts, zs, _, m, _, _, info = lapack.ztrsen(select.astype(np.int32), t, z, job="N")
    if info != 0:
        raise DecompositionError(f"eigenvalue reordering failed (info={info})")
    return np.triu(ts), zs, int(m)


def _sylvester(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Solve ``a X - X b = c`` for upper-triangular ``a`` and ``b``."""
    if c.size == 0:
        return np.zeros_like(c)
    x, scale, info = lapack.ztrsyl(a, b, c, isgn=-1)
    if info < 0:
        raise DecompositionError(f"Sylvester solve failed (info={info})")
    return x / scale


def _block_diagonalize(t: np.ndarray, bounds: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Return unit block upper-triangular ``W`` and its inverse with ``t = W diag(t_ii) W^-1``."""
    n = t.shape[0]
    w = np.eye(n, dtype=np.complex128)
    w_inv = np.eye(n, dtype=np.complex128)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi >= n or hi == lo:
            continue
        x = _sylvester(t[lo:hi, lo:hi], t[hi:, hi:], -t[lo:hi, hi:])
        # W <- W [[I, X], [0, I]] restricted to rows/cols lo:, and the inverse update.
        w[:, hi:] += w[:, lo:hi] @ x
        w_inv[lo:hi, :] -= x @ w_inv[hi:, :]
    return w, w_inv


def _clusters(values: np.ndarray, radius: float) -> list[list[int]]:
    """Single-linkage groups of indices whose values lie within ``radius``."""
    n = len(values)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for k in range(i + 1, n):
            if abs(values[i] - values[k]) <= radius:
                parent[find(i)] = find(k)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: min(g))


def _nil_index(tn: np.ndarray) -> tuple[int, float]:
    """Numerical nilpotency index and a tail constant for ``||T_N^n||``, ``n >= index``."""
    size = tn.shape[0]
    if size == 0:
        return 1, 0.0
    p = np.eye(size, dtype=np.complex128)
    max_norm = 1.0
    for n in range(1, size + 2):
        p = p @ tn
        norm = float(np.linalg.norm(p, 2))
        if norm <= _NIL_ZERO:
            # For m >= n: ||T^m|| <= ||T^n||^floor(m/n) * max_{r<n} ||T^r||.
            return n, norm * max_norm
        max_norm = max(max_norm, norm)
    return size + 1, math.inf


_CACHE: "weakref.WeakKeyDictionary[SuperOperator, dict[Tolerances, SpectralData]]" = weakref.WeakKeyDictionary()


def decompose(channel: SuperOperator, tol: Tolerances = DEFAULT_TOL, use_cache: bool = True) -> SpectralData:
    """Block spectral decomposition of ``channel.matrix``; results are cached per channel."""
    if use_cache:
        hit = _CACHE.get(channel, {}).get(tol)
        if hit is not None:
            return hit
    sd = _decompose(channel.matrix, tol)
    if use_cache:
        _CACHE.setdefault(channel, {})[tol] = sd
    return sd


def decompose_matrix(m: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> SpectralData:
    return _decompose(np.asarray(m, dtype=np.complex128), tol)


def _decompose(m: np.ndarray, tol: Tolerances) -> SpectralData:
    n = m.shape[0]
    m_norm = max(float(np.linalg.norm(m)), 1.0)
    peripheral = lambda lam: abs(lam) > 1 - tol.unit  # noqa: E731
    t, z, n_per = sla.schur(m, output="complex", sort=peripheral)
    t = np.triu(t)

    diag = np.diag(t)
    per_clusters = _clusters(diag[:n_per], tol.cluster) if n_per else []
    centers = [diag[g].mean() for g in per_clusters]

    def nearest_center(lam: complex) -> int:
        return int(np.argmin([abs(lam - c) for c in centers]))

    # Order: peripheral clusters one by one, then non-zero contracting, then nilpotent.
    bounds = [0]
    for c in range(len(centers)):
        d = np.diag(t)
        select = np.array([peripheral(x) and nearest_center(x) <= c for x in d])
        t, z, k = _reorder(t, z, select)
        bounds.append(k)
    d = np.diag(t)
    t, z, k = _reorder(t, z, np.array([abs(x) > tol.nil for x in d]))
    n_contract = k - n_per
    bounds += [k, n]
    bounds = sorted(set(bounds))

    w, w_inv = _block_diagonalize(t, bounds)

    # Peripheral blocks must be semisimple; J takes their diagonal.
    cluster_ranges = []
    semisimple_tol = max(tol.recon, 1e-10) * m_norm
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi > n_per:
            break
        block = t[lo:hi, lo:hi]
        defect = float(np.linalg.norm(block - np.diag(np.diag(block))))
        if defect > semisimple_tol:
            raise DecompositionError("peripheral eigenvalue is not semisimple", defect)
        cluster_ranges.append(tuple(range(lo, hi)))

    ta = t[n_per:k, n_per:k]
    tn = t[k:, k:]
    zw = z @ w
    zw_inv = w_inv @ z.conj().T

    def assemble(lam_a, v_a, v_a_inv):
        j = np.zeros((n, n), dtype=np.complex128)
        j[range(n_per), range(n_per)] = np.diag(t)[:n_per]
        j[n_per:k, n_per:k] = np.diag(lam_a) if v_a is not None else ta
        j[k:, k:] = tn
        s, s_inv = zw, zw_inv
        if v_a is not None:
            s = zw.copy()
            s[:, n_per:k] = zw[:, n_per:k] @ v_a
            s_inv = zw_inv.copy()
            s_inv[n_per:k] = v_a_inv @ zw_inv[n_per:k]
        return j, s, s_inv

    # Prefer a diagonal contracting block: then every Jordan block there has size one.
    diagonal = False
    if n_contract:
        lam_a, vecs = np.linalg.eig(ta)
        vecs /= np.linalg.norm(vecs, axis=0)
        try:
            vecs_inv = np.linalg.inv(vecs)
            diagonal = bool(np.isfinite(vecs_inv).all())
        except np.linalg.LinAlgError:
            pass
    if diagonal:
        j, s, s_inv = assemble(lam_a, vecs, vecs_inv)
        cond = float(np.linalg.norm(s, 2) * np.linalg.norm(s_inv, 2))
        residual = float(np.linalg.norm(s @ j @ s_inv - m)) / m_norm
        diagonal = cond < _MAX_EIG_COND and residual <= tol.recon
    if not diagonal:
        lam_a = np.diag(ta).copy()
        j, s, s_inv = assemble(lam_a, None, None)
        cond = math.inf
        residual = float(np.linalg.norm(s @ j @ s_inv - m)) / m_norm
    if residual > tol.recon:
        raise DecompositionError("reconstruction check failed", residual)

    nil_index, nil_tail = _nil_index(tn)
    if not n_contract:
        omega = 0.0
        d_omega = nil_index
    else:
        mods = np.abs(lam_a)
        omega = float(mods.max())
        if diagonal:
            d_omega = 1
        else:
            # Conservative: a cluster at modulus omega counts as one Jordan block.
            near = lam_a[mods >= omega - tol.cluster]
            d_omega = max(len(g) for g in _clusters(near, tol.cluster))

    eigenvalues = np.concatenate([np.diag(t)[:n_per], lam_a, np.diag(tn)])
    return SpectralData(
        matrix=m,
        eigenvalues=eigenvalues,
        s=s,
        s_inv=s_inv,
        j=j,
        n_peripheral=n_per,
        n_contracting=n_contract,
        n_nilpotent=n - k,
        peripheral_clusters=tuple(cluster_ranges),
        omega=omega,
        d_omega=int(d_omega),
        nil_index=nil_index,
        nil_tail=nil_tail,
        contracting_diagonal=diagonal,
        cond_number=max(cond, 1.0),
        residual=residual,
        tol=tol,
    )


# --- periodic stability ------------------------------------------------------


def phase_of(lam: complex) -> float:
    """Phase ``psi`` in ``(-1/2, 1/2]`` with ``lam / |lam| = exp(2 pi i psi)``."""
    psi = float(np.angle(lam) / (2 * np.pi))
    return 0.5 if psi <= -0.5 else psi


def rational_phase(psi: float, q_max: int, tol_phase: float) -> tuple[int, int] | None:
    """Best rational approximation ``p/q`` with ``q <= q_max`` if within ``tol_phase``."""
    frac = Fraction(psi).limit_denominator(q_max)
    if abs(psi - frac.numerator / frac.denominator) <= tol_phase:
        return frac.numerator, frac.denominator
    return None


def peripheral_components(sd: SpectralData, rho0: object, q_max: int = 64) -> list[PeripheralPhase]:
    """Phases of peripheral eigenvalue clusters that carry weight in ``rho0``."""
    coeffs = sd.peripheral_coefficients(vectorize(rho0))
    out = []
    for idx in sd.peripheral_clusters:
        sel = list(idx)
        weight = float(np.linalg.norm(sd.s[:, sel] @ coeffs[sel]))
        if weight > sd.tol.coeff:
            lam = complex(np.mean(np.diag(sd.j)[sel]))
            psi = phase_of(lam)
            out.append(PeripheralPhase(sel[0], psi, rational_phase(psi, q_max, sd.tol.phase), weight))
    return out


def check_stability(
    g: QMC,
    q_max: int = 64,
    tol: Tolerances = DEFAULT_TOL,
    sd: SpectralData | None = None,
) -> StabilityReport:
    sd = sd if sd is not None else decompose(g.transition, tol)
    phases = tuple(peripheral_components(sd, g.initial, q_max))
    bad = [ph for ph in phases if ph.rational is None]
    if bad:
        detail = ", ".join(f"exp(2 pi i * {ph.phase:.12g}) (weight {ph.weight:.3g})" for ph in bad)
        return StabilityReport(
            Stability.UNDETERMINED,
            None,
            phases,
            f"no rational phase p/q with q <= {q_max} within {tol.phase:g} for eigenvalue(s) {detail}",
        )
    period = math.lcm(*(ph.rational[1] for ph in phases)) if phases else 1
    return StabilityReport(Stability.STABLE, period, phases)


def stabilizer(sd: SpectralData) -> ComplexMatrix:
    """``S J_phi S^-1``: projection onto the peripheral eigenspace."""
    p = sd.n_peripheral
    return sd.s[:, :p] @ sd.s_inv[:p]


def stable_states(g: QMC, report: StabilityReport, sd: SpectralData | None = None) -> list[ComplexMatrix]:
    """The limit-cycle states ``eta_k = E_phi(E^k(rho0))`` for ``k < period``."""
    report.require_stable()
    sd = sd if sd is not None else decompose(g.transition)
    lam = np.diag(sd.j)[: sd.n_peripheral]
    c = sd.peripheral_coefficients(vectorize(g.initial))
    states = []
    for k in range(report.period):
        eta = devectorize(sd.peripheral_component(c * lam**k))
        states.append((eta + eta.conj().T) / 2)
    return states


def decay_constant(sd: SpectralData) -> float:
    """``C`` with ``||M^n - M_psi^n|| <= C omega^n n^(d_omega - 1)`` beyond the nilpotent transient."""
    alpha = sd.cond_number
    d, w = sd.d_omega, sd.omega
    if d == 1 or w == 0:
        return alpha
    literal = alpha * (w * (d - 1)) ** (d - 1)
    # Jordan block bound ||(wI + N)^n|| <= w^n n^(d-1) sum_j w^-j / j!.
    sound = alpha * sum(w ** (-k) / math.factorial(k) for k in range(d))
    return max(literal, sound)


def truncation_bound(sd: SpectralData, report: StabilityReport, epsilon: float) -> int:
    """Smallest ``K`` with the decay bound below ``epsilon`` for every ``n >= K``."""
    report.require_stable()
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    lower = max(sd.d_omega, sd.nil_index, 1)
    if sd.omega == 0.0:
        if sd.nil_tail * sd.cond_number >= epsilon:
            raise TruncationUnavailable("nilpotent tail does not vanish numerically")
        return lower
    if not math.isfinite(sd.cond_number):
        raise TruncationUnavailable("no well-conditioned eigenbasis for the contracting block")
    budget = epsilon - sd.nil_tail * sd.cond_number
    if budget <= 0:
        raise TruncationUnavailable("nilpotent tail exceeds epsilon")
    c = decay_constant(sd)
    d, w = sd.d_omega, sd.omega
    log_w = math.log(w)

    def log_f(x: float) -> float:
        return math.log(c) + x * log_w + (d - 1) * math.log(x)

    peak = max(1.0, (d - 1) / -log_w)
    target = math.log(budget)
    first = math.ceil(peak)
    if max(log_f(max(1, math.floor(peak))), log_f(first)) < target:
        return lower
    # log_f decreases past the peak, so bisect for the first crossing there.
    lo, hi = first, first
    while log_f(hi) >= target:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if log_f(mid) < target:
            hi = mid
        else:
            lo = mid + 1
    return max(lower, lo)


def distances_to_cycle(g: QMC, states: Sequence[np.ndarray], n: int) -> np.ndarray:
    """``||E^m(rho0) - eta_(m mod p)||_2`` for ``m < n``."""
    p = len(states)
    out = np.empty(n)
    rho = np.array(g.initial)
    for m in range(n):
        out[m] = np.linalg.norm(rho - states[m % p])
        rho = g.transition(rho)
    return out


def truncation_bound_simulated(
    g: QMC,
    states: Sequence[np.ndarray],
    epsilon: float,
    n_max: int = 100_000,
    safety_margin: float = 0.9,
    confirm_cycles: int = 3,
) -> int:
    """First ``n`` opening a window of ``p * confirm_cycles`` steps within ``epsilon * safety_margin``."""
    p = len(states)
    window = p * confirm_cycles
    threshold = epsilon * safety_margin
    run_start, run_len = 0, 0
    rho = np.array(g.initial)
    for m in range(n_max + window):
        if np.linalg.norm(rho - states[m % p]) < threshold:
            if run_len == 0:
                run_start = m
            run_len += 1
            if run_len >= window:
                return run_start
        else:
            run_len = 0
            if m >= n_max:
                break
        rho = g.transition(rho)
    raise TruncationUnavailable(f"trajectory not within {threshold:g} of the cycle by step {n_max}")


def stability_summary(sd: SpectralData, report: StabilityReport) -> dict:
    """JSON-ready description of the spectrum and the stability verdict."""
    mods = np.sort(np.abs(sd.eigenvalues))[::-1]
    return {
        "dimension": sd.dim,
        "eigenvalue_moduli": [float(x) for x in mods],
        "n_peripheral": sd.n_peripheral,
        "peripheral_phases": [
            {
                "eigen_index": ph.eigen_index,
                "phase": ph.phase,
                "rational": None if ph.rational is None else {"p": ph.rational[0], "q": ph.rational[1]},
                "weight": ph.weight,
            }
            for ph in report.contributing_phases
        ],
        "omega": sd.omega,
        "d_omega": sd.d_omega,
        "nil_index": sd.nil_index,
        "cond_number": sd.cond_number if math.isfinite(sd.cond_number) else None,
        "residual": sd.residual,
        "stable": report.stable.value,
        "period": report.period,
        "witness": report.witness,
    }

