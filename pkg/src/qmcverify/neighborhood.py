"""Symbolic epsilon-neighborhoods of states under the Hilbert-Schmidt norm.

For each proposition ``(M, I)`` we bound the values of ``tr(M rho')`` over
the closed ball ``{rho' density : ||rho' - eta||_2 <= eps}`` and classify the
proposition as certainly satisfied, certainly violated or ambiguous. The
resulting letter set is a product over propositions, which contains the
exact neighborhood.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .linalg import DEFAULT_TOL, DimensionError, Tolerances, expectation
from .mltl import AtomicProp, ProbInterval, probability


class Mode(str, enum.Enum):
    CHEAP = "cheap"
    REFINED = "refined"


class Status(str, enum.Enum):
    MUST_HOLD = "must_hold"
    MUST_FAIL = "must_fail"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class APStatus:
    ap: str
    status: Status
    range: tuple[float, float]


@dataclass(frozen=True)
class SymbolSet:
    """Letters ``base | s`` for every ``s`` contained in ``ambiguous``."""

    base: frozenset[str]
    ambiguous: frozenset[str]
    excluded: frozenset[str] = frozenset()
    statuses: tuple[APStatus, ...] = ()

    def __post_init__(self) -> None:
        if self.base & self.ambiguous or self.excluded & (self.base | self.ambiguous):
            raise ValueError("base, ambiguous and excluded propositions must be disjoint")

    @classmethod
    def singleton(cls, letter: Iterable[str], universe: Iterable[str]) -> SymbolSet:
        base = frozenset(letter)
        return cls(base, frozenset(), frozenset(universe) - base)

    @property
    def universe(self) -> frozenset[str]:
        return self.base | self.ambiguous | self.excluded

    def __contains__(self, letter: Iterable[str]) -> bool:
        lt = frozenset(letter)
        return self.base <= lt and not (lt & self.excluded)

    def __len__(self) -> int:
        return 2 ** len(self.ambiguous)

    def letters(self) -> Iterator[frozenset[str]]:
        amb = sorted(self.ambiguous)
        for r in range(len(amb) + 1):
            for extra in combinations(amb, r):
                yield self.base | frozenset(extra)

    def restrict(self, names: Iterable[str]) -> SymbolSet:
        keep = frozenset(names)
        return SymbolSet(
            self.base & keep,
            self.ambiguous & keep,
            self.excluded & keep,
            tuple(s for s in self.statuses if s.ap in keep),
        )

    def to_json(self) -> dict:
        return {
            "must_hold": sorted(self.base),
            "ambiguous": sorted(self.ambiguous),
            "must_fail": sorted(self.excluded),
        }

    def __str__(self) -> str:
        parts = sorted(self.base) + [f"{a}?" for a in sorted(self.ambiguous)] + [f"!{a}" for a in sorted(self.excluded)]
        return "{" + ", ".join(parts) + "}"


def _herm(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def cheap_range(eta: np.ndarray, m: np.ndarray, eps: float) -> tuple[float, float]:
    """``tr(M eta) -/+ eps ||M||_2``, clipped to the spectrum of ``M`` and to ``[0, 1]``."""
    center = expectation(m, eta)
    radius = eps * float(np.linalg.norm(m))
    w = np.linalg.eigvalsh(_herm(m))
    lo = max(center - radius, float(w[0]), 0.0)
    hi = min(center + radius, float(w[-1]), 1.0)
    return lo, max(lo, hi)


def _upper_excess(eta: np.ndarray, m: np.ndarray, eps: float, kernel: np.ndarray) -> float:
    """Sound bound on ``max tr(M (rho' - eta))`` over the ball.

    For any real ``c`` and ``Z >= 0``, trace-zero ``D = rho' - eta`` gives
    ``tr(M D) = tr((M - cI + Z) D) - tr(Z rho') + tr(Z eta)
              <= eps ||M - cI + Z||_2 + tr(Z eta)``.
    ``Z`` is the positive part of ``cI - M`` compressed to the near-kernel of
    ``eta``, where the ball cannot push weight negative.
    """
    d = m.shape[0]
    w = np.linalg.eigvalsh(m)

    def bound(c: float) -> float:
        shifted = m - c * np.eye(d)
        if kernel.shape[1]:
            a = kernel.conj().T @ (-shifted) @ kernel
            vals, vecs = np.linalg.eigh(_herm(a))
            pos = np.clip(vals, 0, None)
            z = kernel @ (vecs * pos) @ vecs.conj().T @ kernel.conj().T
            return eps * float(np.linalg.norm(shifted + z)) + max(expectation(z, eta), 0.0)
        return eps * float(np.linalg.norm(shifted))

    lo, hi = float(w[0]), float(w[-1])
    if hi - lo < 1e-15:
        return bound(lo)
    res = minimize_scalar(bound, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10 * max(1.0, hi - lo)})
    return min(float(res.fun), bound(float(np.trace(m).real) / d))


def refined_range(eta: np.ndarray, m: np.ndarray, eps: float, kernel_tol: float = 1e-9) -> tuple[float, float]:
    """Dual bound on the range, intersected with ``cheap_range``."""
    mh = _herm(m)
    e = _herm(np.asarray(eta, dtype=np.complex128))
    vals, vecs = np.linalg.eigh(e)
    kernel = vecs[:, vals <= kernel_tol]
    center = expectation(mh, e)
    up = _upper_excess(e, mh, eps, kernel)
    down = _upper_excess(e, -mh, eps, kernel)
    c_lo, c_hi = cheap_range(e, mh, eps)
    lo = max(center - down, c_lo)
    hi = min(center + up, c_hi)
    return lo, max(lo, hi)


def ap_range(
    eta: object,
    m: object,
    eps: float,
    mode: Mode | str = Mode.CHEAP,
) -> tuple[float, float]:
    """Interval containing ``tr(M rho')`` for every density ``rho'`` with ``||rho' - eta||_2 <= eps``."""
    e = np.asarray(eta, dtype=np.complex128)
    op = np.asarray(m, dtype=np.complex128)
    if e.shape != op.shape or e.ndim != 2:
        raise DimensionError(f"state shape {e.shape} != operator shape {op.shape}")
    if eps < 0:
        raise ValueError("epsilon must be non-negative")
    if Mode(mode) is Mode.REFINED:
        return refined_range(e, op, eps)
    return cheap_range(e, op, eps)


def classify(rng: tuple[float, float], interval: ProbInterval, tol: Tolerances = DEFAULT_TOL) -> Status:
    """Compare a probability range with an interval, treating near-ties as ambiguous.

    Closed endpoints at 0 or 1 never tie: no probability lies beyond them.
    """
    lo, hi = rng
    tau = tol.trace
    if hi - lo <= tau:
        x = (lo + hi) / 2
        # Near an open endpoint round-off decides membership either way.
        if (not interval.lo_closed and abs(x - interval.lo) <= tau) or (
            not interval.hi_closed and abs(x - interval.hi) <= tau
        ):
            return Status.AMBIGUOUS
        return Status.MUST_HOLD if interval.contains(x, tau) else Status.MUST_FAIL
    lo_ok = lo >= interval.lo + tau or (interval.lo_closed and interval.lo == 0.0)
    hi_ok = hi <= interval.hi - tau or (interval.hi_closed and interval.hi == 1.0)
    if lo_ok and hi_ok:
        return Status.MUST_HOLD
    if hi < interval.lo - tau or lo > interval.hi + tau:
        return Status.MUST_FAIL
    return Status.AMBIGUOUS


def ap_status(
    eta: object,
    ap: AtomicProp,
    eps: float,
    mode: Mode | str = Mode.CHEAP,
    tol: Tolerances = DEFAULT_TOL,
) -> APStatus:
    if eps == 0:
        p = probability(eta, ap.operator, tol)
        rng = (p, p)
    else:
        rng = ap_range(eta, ap.operator, eps, mode)
    return APStatus(ap.name, classify(rng, ap.interval, tol), rng)


def neighborhood(
    eta: object,
    eps: float,
    aps: Sequence[AtomicProp],
    mode: Mode | str = Mode.CHEAP,
    tol: Tolerances = DEFAULT_TOL,
) -> SymbolSet:
    statuses = tuple(ap_status(eta, a, eps, mode, tol) for a in aps)
    pick = lambda st: frozenset(s.ap for s in statuses if s.status is st)  # noqa: E731
    return SymbolSet(pick(Status.MUST_HOLD), pick(Status.AMBIGUOUS), pick(Status.MUST_FAIL), statuses)
