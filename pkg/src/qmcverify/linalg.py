"""Dense complex linear algebra for quantum states and superoperators.

Conventions used throughout the package:

* Density matrices and measurement operators are plain ``(d, d)`` complex
  ``numpy`` arrays.
* Vectorization is row-major, ``|A> = (A (x) I)|Omega>``, so
  ``vectorize(A)[k * d + j] == A[k, j]``.
* The matrix representation of a channel with Kraus operators ``E_k`` is
  ``sum_k kron(E_k, conj(E_k))``; it acts on row-major vectorized operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

ComplexMatrix = NDArray[np.complex128]


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by every module.

    Attributes:
        herm: Hermiticity, ``||rho - rho^dagger||_2``.
        trace: trace deviation from one; also the clamp margin for
            measurement probabilities.
        psd: most negative eigenvalue tolerated in PSD checks.
        kraus: completeness defect ``||sum E^dagger E - I||_2``.
        unit: eigenvalues with modulus above ``1 - unit`` are peripheral.
        phase: largest gap ``|psi - p/q|`` accepted as a rational phase.
        coeff: smallest spectral-component norm counted as contributing.
        cluster: eigenvalues closer than this are treated as one cluster.
        recon: relative reconstruction error tolerated for ``S J S^-1``.
        nil: contracting eigenvalues below this modulus are treated as zero.
    """

    herm: float = 1e-9
    trace: float = 1e-9
    psd: float = 1e-8
    kraus: float = 1e-9
    unit: float = 1e-9
    phase: float = 1e-9
    coeff: float = 1e-8
    cluster: float = 1e-7
    recon: float = 1e-8
    nil: float = 1e-5


DEFAULT_TOL = Tolerances()


class DimensionError(ValueError):
    """Raised when operand shapes do not match."""


class ValidationError(ValueError):
    """Raised when an object violates one of its defining invariants."""

    def __init__(self, report: ValidationReport):
        super().__init__(str(report))
        self.report = report


@dataclass(frozen=True)
class Violation:
    invariant: str
    magnitude: float

    def __str__(self) -> str:
        return f"{self.invariant} (magnitude {self.magnitude:.3g})"


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of ``validate_*``; truthy iff no invariant is violated."""

    kind: str
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_invalid(self) -> None:
        if not self.ok:
            raise ValidationError(self)

    def __str__(self) -> str:
        if self.ok:
            return f"{self.kind}: ok"
        return f"{self.kind}: " + "; ".join(str(v) for v in self.violations)


def as_matrix(a: object) -> ComplexMatrix:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def _square(a: object) -> ComplexMatrix:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """A quantum channel given by its Kraus operators.

    The ``d^2 x d^2`` matrix representation is computed once on first access.
    """

    kraus: tuple[ComplexMatrix, ...]

    def __init__(self, kraus: Sequence[object]):
        ops = tuple(_square(k) for k in kraus)
        if not ops:
            raise ValueError("a superoperator needs at least one Kraus operator")
        d = ops[0].shape[0]
        if any(k.shape != (d, d) for k in ops):
            raise DimensionError("Kraus operators must share one square shape")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus", ops)

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    @cached_property
    def matrix(self) -> ComplexMatrix:
        return matrix_rep(self)

    def __call__(self, rho: object) -> ComplexMatrix:
        return apply(self, rho)


@dataclass(frozen=True, eq=False)
class QMC:
    """A quantum Markov chain: transition channel plus initial state."""

    transition: SuperOperator
    initial: ComplexMatrix = field(repr=False)

    def __post_init__(self) -> None:
        rho = _square(self.initial)
        if rho.shape[0] != self.transition.dim:
            raise DimensionError(
                f"initial state has dimension {rho.shape[0]}, "
                f"transition acts on dimension {self.transition.dim}"
            )
        rho.setflags(write=False)
        object.__setattr__(self, "initial", rho)

    @property
    def dim(self) -> int:
        return self.transition.dim

    def with_initial(self, rho: object) -> QMC:
        return QMC(self.transition, rho)


def apply(channel: SuperOperator, rho: object) -> ComplexMatrix:
    """Return ``sum_k E_k rho E_k^dagger``."""
    r = _square(rho)
    if r.shape[0] != channel.dim:
        raise DimensionError(f"state dimension {r.shape[0]} != channel dimension {channel.dim}")
    out = np.zeros_like(r)
    for e in channel.kraus:
        out += e @ r @ e.conj().T
    return out


def matrix_rep(channel: SuperOperator) -> ComplexMatrix:
    """Return ``M_E = sum_k E_k (x) conj(E_k)``."""
    d = channel.dim
    m = np.zeros((d * d, d * d), dtype=np.complex128)
    for e in channel.kraus:
        m += np.kron(e, e.conj())
    return m


def vectorize(a: object) -> NDArray[np.complex128]:
    return _square(a).reshape(-1).copy()


def devectorize(v: object) -> ComplexMatrix:
    vec = np.asarray(v, dtype=np.complex128).reshape(-1)
    d = int(round(np.sqrt(vec.size)))
    if d * d != vec.size:
        raise DimensionError(f"vector length {vec.size} is not a perfect square")
    return vec.reshape(d, d).copy()


def max_entangled(d: int) -> NDArray[np.complex128]:
    """Unnormalized ``|Omega> = sum_k |k>|k>``."""
    return np.eye(d, dtype=np.complex128).reshape(-1)


def partial_trace_2(m: object) -> ComplexMatrix:
    """Trace out the second tensor factor of a ``d^2 x d^2`` operator."""
    mat = _square(m)
    d = int(round(np.sqrt(mat.shape[0])))
    if d * d != mat.shape[0]:
        raise DimensionError(f"dimension {mat.shape[0]} is not a perfect square")
    return np.einsum("ikjk->ij", mat.reshape(d, d, d, d))


def hs_norm(a: object) -> float:
    """Schatten 2-norm (Frobenius / Hilbert-Schmidt)."""
    return float(np.linalg.norm(np.asarray(a, dtype=np.complex128)))


def expectation(m: object, rho: object) -> float:
    """Real part of ``tr(M rho)``."""
    return float(np.real(np.einsum("ij,ji->", np.asarray(m), np.asarray(rho))))


def _herm_eigs(a: ComplexMatrix) -> NDArray[np.float64]:
    return np.linalg.eigvalsh((a + a.conj().T) / 2)


def validate_state(rho: object, tol: Tolerances = DEFAULT_TOL) -> ValidationReport:
    r = _square(rho)
    found = []
    herm = hs_norm(r - r.conj().T)
    if herm > tol.herm:
        found.append(Violation("hermitian", herm))
    lo = float(_herm_eigs(r).min())
    if lo < -tol.psd:
        found.append(Violation("positive semi-definite", -lo))
    tr = np.trace(r)
    if abs(tr - 1) > tol.trace:
        found.append(Violation(f"unit trace (tr = {tr.real:.6g})", float(abs(tr - 1))))
    return ValidationReport("density matrix", tuple(found))


def validate_measurement(m: object, tol: Tolerances = DEFAULT_TOL) -> ValidationReport:
    mat = _square(m)
    found = []
    herm = hs_norm(mat - mat.conj().T)
    if herm > tol.herm:
        found.append(Violation("hermitian", herm))
    eigs = _herm_eigs(mat)
    if eigs.min() < -tol.psd:
        found.append(Violation("positive semi-definite", float(-eigs.min())))
    if eigs.max() > 1 + tol.psd:
        found.append(Violation("M <= I", float(eigs.max() - 1)))
    return ValidationReport("measurement operator", tuple(found))


def validate_channel(channel: SuperOperator, tol: Tolerances = DEFAULT_TOL) -> ValidationReport:
    d = channel.dim
    found = []
    completeness = sum(e.conj().T @ e for e in channel.kraus)
    defect = hs_norm(completeness - np.eye(d))
    if defect > tol.kraus:
        found.append(Violation("Kraus completeness", defect))
    if len(channel.kraus) > d * d:
        found.append(Violation("Kraus count <= d^2", float(len(channel.kraus) - d * d)))
    return ValidationReport("superoperator", tuple(found))


def validate(obj: object, tol: Tolerances = DEFAULT_TOL, kind: str = "state") -> ValidationReport:
    """Dispatch to the matching validator.

    A ``SuperOperator`` or ``QMC`` is recognised by type; bare matrices are
    checked as density matrices unless ``kind="measurement"``.
    """
    if isinstance(obj, SuperOperator):
        return validate_channel(obj, tol)
    if isinstance(obj, QMC):
        chan = validate_channel(obj.transition, tol)
        state = validate_state(obj.initial, tol)
        return ValidationReport("qmc", chan.violations + state.violations)
    if kind == "measurement":
        return validate_measurement(obj, tol)
    return validate_state(obj, tol)


def ket(d: int, k: int) -> NDArray[np.complex128]:
    v = np.zeros(d, dtype=np.complex128)
    v[k] = 1
    return v


def projector(v: object) -> ComplexMatrix:
    vec = np.asarray(v, dtype=np.complex128).reshape(-1)
    return np.outer(vec, vec.conj())


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> ComplexMatrix:
    """Random density matrix of the given rank (Ginibre construction)."""
    r = d if rank is None else rank
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_channel(d: int, n_kraus: int, rng: np.random.Generator) -> SuperOperator:
    """Random channel from a Haar-like isometry ``C^d -> C^(d * n_kraus)``."""
    g = rng.normal(size=(d * n_kraus, d)) + 1j * rng.normal(size=(d * n_kraus, d))
    q, _ = np.linalg.qr(g)
    return SuperOperator([q[k * d:(k + 1) * d, :] for k in range(n_kraus)])
