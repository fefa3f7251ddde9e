"""Built-in chains: classical Markov chains, the absorbing Hadamard walk and
its classical counterpart.

Walk basis ordering is position-major, coin-minor: index ``2k`` is
``|s_k>|L>`` and ``2k + 1`` is ``|s_k>|R>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .linalg import QMC, SuperOperator, ket, projector
from .mltl import INV_SQRT2, AtomicProp, ProbInterval

HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)

# Intervals of the walk experiments; the width around 1/sqrt(2) is 0.1.
I_ABS = ProbInterval.closed(INV_SQRT2 - 0.1, INV_SQRT2 + 0.1)
I_LT_HALF = ProbInterval(0.0, 0.5, True, False)
I_GT_04 = ProbInterval(0.4, 1.0, False, True)


@dataclass(frozen=True)
class WalkSpec:
    d: int
    start: int
    direction: str = "R"

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ValueError(f"lattice size d must be at least 2, got {self.d}")
        if not 0 <= self.start <= self.d:
            raise ValueError(f"start position {self.start} outside [0, {self.d}]")
        if self.direction not in ("L", "R"):
            raise ValueError(f"direction must be 'L' or 'R', got {self.direction!r}")

    @property
    def dim(self) -> int:
        return 2 * (self.d + 1)


def classical_mc_to_qmc(p: object, mu0: object, tol: float = 1e-9) -> QMC:
    """Encode a row-stochastic matrix with Kraus operators ``sqrt(p_kl)|s_l><s_k|``."""
    pm = np.asarray(p, dtype=float)
    mu = np.asarray(mu0, dtype=float).reshape(-1)
    n = pm.shape[0]
    if pm.shape != (n, n):
        raise ValueError(f"transition matrix must be square, got shape {pm.shape}")
    if mu.shape != (n,):
        raise ValueError(f"initial distribution has length {mu.size}, expected {n}")
    if (pm < -tol).any() or np.abs(pm.sum(axis=1) - 1).max() > tol:
        raise ValueError("transition matrix is not row-stochastic")
    if (mu < -tol).any() or abs(mu.sum() - 1) > tol:
        raise ValueError("initial distribution must be non-negative and sum to 1")
    kraus = []
    for k in range(n):
        for l in range(n):
            if pm[k, l] > 0:
                e = np.zeros((n, n), dtype=np.complex128)
                e[l, k] = np.sqrt(pm[k, l])
                kraus.append(e)
    return QMC(SuperOperator(kraus), np.diag(np.clip(mu, 0, None)).astype(np.complex128))


def shift_operator(d: int) -> np.ndarray:
    """``U_S``: coin L moves to ``s_(k-1)``, coin R to ``s_(k+1)``, modulo ``d + 1``."""
    n = d + 1
    u = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    for k in range(n):
        u[2 * ((k - 1) % n), 2 * k] = 1
        u[2 * ((k + 1) % n) + 1, 2 * k + 1] = 1
    return u


def position_projector(d: int, k: int) -> np.ndarray:
    """``|s_k><s_k| (x) I_c`` on the walk space."""
    return np.kron(projector(ket(d + 1, k)), np.eye(2, dtype=np.complex128))


def walk_state(spec: WalkSpec) -> np.ndarray:
    coin = 0 if spec.direction == "L" else 1
    return projector(ket(spec.dim, 2 * spec.start + coin))


@lru_cache(maxsize=None)
def quantum_walk_channel(d: int) -> SuperOperator:
    """Kraus pair ``{U M_no, M_yes}``; cached so chains of equal size share spectral data."""
    u = shift_operator(d) @ np.kron(np.eye(d + 1), HADAMARD)
    m_yes = position_projector(d, 0) + position_projector(d, d)
    m_no = np.eye(2 * (d + 1), dtype=np.complex128) - m_yes
    return SuperOperator([u @ m_no, m_yes])


def quantum_walk(spec: WalkSpec) -> QMC:
    """Hadamard walk on ``s_0 .. s_d`` with absorbing boundary measurement."""
    return QMC(quantum_walk_channel(spec.d), walk_state(spec))


def absorbing_walk_matrix(d: int) -> np.ndarray:
    p = np.zeros((d + 1, d + 1))
    p[0, 0] = p[d, d] = 1
    for k in range(1, d):
        p[k, k - 1] = p[k, k + 1] = 0.5
    return p


@lru_cache(maxsize=None)
def classical_walk_channel(d: int) -> SuperOperator:
    return classical_mc_to_qmc(absorbing_walk_matrix(d), np.eye(d + 1)[0]).transition


def classical_walk(spec: WalkSpec) -> QMC:
    """Unbiased absorbing random walk; the coin direction is ignored."""
    return QMC(classical_walk_channel(spec.d), projector(ket(spec.d + 1, spec.start)))


def walk_ap_set(
    d: int,
    intervals: Mapping[str, ProbInterval] | Sequence[ProbInterval],
    coin: bool = True,
) -> list[AtomicProp]:
    """Propositions ``(M_{s_k}, I)`` for every position and interval.

    Names are ``p{k}{tag}``; a plain sequence of intervals gets tags
    ``i0, i1, ...``. With ``coin=False`` the operators act on positions only,
    which suits the classical walk.
    """
    if d < 2:
        raise ValueError(f"lattice size d must be at least 2, got {d}")
    tagged = intervals.items() if isinstance(intervals, Mapping) else ((f"i{l}", iv) for l, iv in enumerate(intervals))
    tagged = list(tagged)
    aps = []
    for k in range(d + 1):
        op = position_projector(d, k) if coin else projector(ket(d + 1, k))
        for tag, iv in tagged:
            aps.append(AtomicProp(f"p{k}{tag}", op, iv))
    return aps


def builtin_walk_aps(d: int, coin: bool = True) -> list[AtomicProp]:
    """Every position with the three experiment intervals, plus ``abs0``.

    Yields names such as ``p20lt``, ``p19gt`` and ``p1gt`` for ``d = 20``.
    """
    aps = walk_ap_set(d, {"abs": I_ABS, "lt": I_LT_HALF, "gt": I_GT_04}, coin=coin)
    zero = aps[0]
    return [AtomicProp("abs0", zero.operator, I_ABS)] + aps


def phase_channel(psi: float) -> SuperOperator:
    """Single-qubit unitary ``diag(1, exp(2 pi i psi))``."""
    return SuperOperator([np.diag([1.0, np.exp(2j * np.pi * psi)])])
