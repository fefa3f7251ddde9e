"""Measurement-based atomic propositions, formula AST, parser and labeling.

Formula text syntax::

    phi ::= true | false | ap(name) | ( phi )
          | ! phi | X phi | F phi | G phi
          | phi U phi | phi & phi | phi | phi | phi -> phi

Precedence, tightest first: unary operators, ``U``, ``&``, ``|``, ``->``.
``U`` and ``->`` associate to the right.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union

import numpy as np

from .linalg import DEFAULT_TOL, ComplexMatrix, DimensionError, Tolerances, as_matrix, expectation, validate_measurement


@dataclass(frozen=True)
class ProbInterval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self) -> None:
        if not (0.0 <= self.lo <= 1.0 and 0.0 <= self.hi <= 1.0):
            raise ValueError(f"interval endpoints must lie in [0, 1], got [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"empty interval: lo {self.lo} > hi {self.hi}")
        if self.lo == self.hi and not (self.lo_closed and self.hi_closed):
            raise ValueError("a degenerate interval must be closed at both ends")

    @classmethod
    def closed(cls, lo: float, hi: float) -> ProbInterval:
        return cls(lo, hi, True, True)

    def contains(self, x: float, slack: float = 0.0) -> bool:
        """Membership; closed endpoints admit values up to ``slack`` outside."""
        above = x >= self.lo - slack if self.lo_closed else x > self.lo
        below = x <= self.hi + slack if self.hi_closed else x < self.hi
        return above and below

    def __contains__(self, x: float) -> bool:
        return self.contains(x)

    def __str__(self) -> str:
        return f"{'[' if self.lo_closed else '('}{self.lo:g}, {self.hi:g}{']' if self.hi_closed else ')'}"

    def to_json(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "lo_closed": self.lo_closed, "hi_closed": self.hi_closed}

    @classmethod
    def from_json(cls, obj: Mapping) -> ProbInterval:
        return cls(float(obj["lo"]), float(obj["hi"]), bool(obj.get("lo_closed", True)), bool(obj.get("hi_closed", True)))


_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*\Z")


@dataclass(frozen=True, eq=False)
class AtomicProp:
    """A pair ``(M, I)``: holds in ``rho`` when ``tr(M rho)`` lies in ``I``."""

    name: str
    operator: ComplexMatrix
    interval: ProbInterval

    def __post_init__(self) -> None:
        if not _NAME.match(self.name) or self.name in _KEYWORDS:
            raise ValueError(f"invalid atomic proposition name {self.name!r}")
        op = as_matrix(self.operator)
        validate_measurement(op).raise_if_invalid()
        op.setflags(write=False)
        object.__setattr__(self, "operator", op)

    @property
    def dim(self) -> int:
        return self.operator.shape[0]

    def __repr__(self) -> str:
        return f"AtomicProp({self.name!r}, dim={self.dim}, {self.interval})"


def probability(rho: object, m: object, tol: Tolerances = DEFAULT_TOL) -> float:
    """``tr(M rho)``, clamped to ``[0, 1]`` when it overshoots by at most ``tol.trace``."""
    r = np.asarray(rho)
    op = np.asarray(m)
    if r.shape != op.shape:
        raise DimensionError(f"state shape {r.shape} != operator shape {op.shape}")
    p = expectation(op, r)
    if -tol.trace <= p < 0.0:
        return 0.0
    if 1.0 < p <= 1.0 + tol.trace:
        return 1.0
    return p


def eval_ap(rho: object, ap: AtomicProp, tol: Tolerances = DEFAULT_TOL) -> bool:
    return ap.interval.contains(probability(rho, ap.operator, tol), tol.trace)


Letter = frozenset  # frozenset[str] of satisfied proposition names


def label(rho: object, aps: Iterable[AtomicProp], tol: Tolerances = DEFAULT_TOL) -> frozenset[str]:
    return frozenset(a.name for a in aps if eval_ap(rho, a, tol))


# --- formula AST -----------------------------------------------------------


@dataclass(frozen=True)
class TrueF:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class Ap:
    name: str

    def __str__(self) -> str:
        return f"ap({self.name})"


@dataclass(frozen=True)
class Not:
    arg: Formula

    def __str__(self) -> str:
        return f"!{_wrap(self.arg)}"


@dataclass(frozen=True)
class Next:
    arg: Formula

    def __str__(self) -> str:
        return f"X {_wrap(self.arg)}"


@dataclass(frozen=True)
class Eventually:
    arg: Formula

    def __str__(self) -> str:
        return f"F {_wrap(self.arg)}"


@dataclass(frozen=True)
class Always:
    arg: Formula

    def __str__(self) -> str:
        return f"G {_wrap(self.arg)}"


@dataclass(frozen=True)
class And:
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Or:
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class Implies:
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return f"({self.left} -> {self.right})"


@dataclass(frozen=True)
class Until:
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return f"({self.left} U {self.right})"


@dataclass(frozen=True)
class Release:
    """Dual of until; only produced by negation normal form."""

    left: Formula
    right: Formula

    def __str__(self) -> str:
        return f"!(!{_wrap(self.left)} U !{_wrap(self.right)})"


Formula = Union[TrueF, Ap, Not, Next, Eventually, Always, And, Or, Implies, Until, Release]

TRUE = TrueF()
FALSE = Not(TRUE)

_UNARY = (Not, Next, Eventually, Always)
_BINARY = (And, Or, Implies, Until, Release)


def _wrap(f: Formula) -> str:
    return str(f) if isinstance(f, (TrueF, Ap, *_BINARY)) else f"({f})"


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, _UNARY):
        return (f.arg,)
    if isinstance(f, _BINARY):
        return (f.left, f.right)
    return ()


def subformulas(f: Formula) -> Iterator[Formula]:
    yield f
    for c in children(f):
        yield from subformulas(c)


def ap_names(f: Formula) -> frozenset[str]:
    return frozenset(g.name for g in subformulas(f) if isinstance(g, Ap))


def desugar(f: Formula) -> Formula:
    """Rewrite into the core grammar ``true | a | !phi | phi | phi | X phi | phi U phi``."""
    match f:
        case TrueF() | Ap():
            return f
        case Not(a):
            return Not(desugar(a))
        case Next(a):
            return Next(desugar(a))
        case Or(a, b):
            return Or(desugar(a), desugar(b))
        case Until(a, b):
            return Until(desugar(a), desugar(b))
        case And(a, b):
            return Not(Or(Not(desugar(a)), Not(desugar(b))))
        case Implies(a, b):
            return Or(Not(desugar(a)), desugar(b))
        case Eventually(a):
            return Until(TRUE, desugar(a))
        case Always(a):
            return Not(Until(TRUE, Not(desugar(a))))
        case Release(a, b):
            return Not(Until(Not(desugar(a)), Not(desugar(b))))
    raise TypeError(f"not a formula: {f!r}")


def nnf(f: Formula, negate: bool = False) -> Formula:
    """Negation normal form over ``true, !true, ap, !ap, &, |, X, U, R``.

    ``F`` and ``G`` are expanded into ``U`` and ``R``.
    """
    match f:
        case TrueF():
            return FALSE if negate else TRUE
        case Ap():
            return Not(f) if negate else f
        case Not(a):
            return nnf(a, not negate)
        case Next(a):
            return Next(nnf(a, negate))
        case And(a, b):
            return (Or if negate else And)(nnf(a, negate), nnf(b, negate))
        case Or(a, b):
            return (And if negate else Or)(nnf(a, negate), nnf(b, negate))
        case Implies(a, b):
            return nnf(Or(Not(a), b), negate)
        case Until(a, b):
            return (Release if negate else Until)(nnf(a, negate), nnf(b, negate))
        case Release(a, b):
            return (Until if negate else Release)(nnf(a, negate), nnf(b, negate))
        case Eventually(a):
            return nnf(Until(TRUE, a), negate)
        case Always(a):
            return nnf(Release(FALSE, a), negate)
    raise TypeError(f"not a formula: {f!r}")


# --- parser ----------------------------------------------------------------

_KEYWORDS = frozenset({"true", "false", "ap", "X", "F", "G", "U"})
_TOKEN = re.compile(r"\s*(?:(->)|([!&|()])|([A-Za-z_][A-Za-z0-9_.\-]*))")


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos}: {text[:pos]}<here>{text[pos:]}")
        self.pos = pos
        self.text = text


class UnknownPropositionError(ValueError):
    def __init__(self, name: str, pos: int):
        super().__init__(f"unknown atomic proposition {name!r} at position {pos}")
        self.name = name
        self.pos = pos


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        start = m.start(m.lastindex)
        tokens.append((m.group(m.lastindex), start))
        pos = m.end()
    tokens.append(("<end>", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, declared: frozenset[str] | None):
        self.text = text
        self.declared = declared
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> str:
        return self.tokens[self.i][0]

    def pos(self) -> int:
        return self.tokens[self.i][1]

    def take(self, expected: str | None = None) -> str:
        tok = self.peek()
        if expected is not None and tok != expected:
            raise FormulaSyntaxError(f"expected {expected!r}, found {tok!r}", self.text, self.pos())
        self.i += 1
        return tok

    def formula(self) -> Formula:
        f = self.implies()
        if self.peek() != "<end>":
            raise FormulaSyntaxError(f"unexpected {self.peek()!r}", self.text, self.pos())
        return f

    def implies(self) -> Formula:
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.implies())
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.until()
        while self.peek() == "&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        left = self.unary()
        if self.peek() == "U":
            self.take()
            return Until(left, self.until())
        return left

    def unary(self) -> Formula:
        ops = {"!": Not, "X": Next, "F": Eventually, "G": Always}
        tok = self.peek()
        if tok in ops:
            self.take()
            return ops[tok](self.unary())
        return self.atom()

    def atom(self) -> Formula:
        tok, pos = self.tokens[self.i]
        if tok == "true":
            self.take()
            return TRUE
        if tok == "false":
            self.take()
            return FALSE
        if tok == "(":
            self.take()
            f = self.implies()
            self.take(")")
            return f
        if tok == "ap":
            self.take()
            self.take("(")
            name, name_pos = self.tokens[self.i]
            if not _NAME.match(name) or name in _KEYWORDS:
                raise FormulaSyntaxError("expected a proposition name", self.text, name_pos)
            self.take()
            self.take(")")
            if self.declared is not None and name not in self.declared:
                raise UnknownPropositionError(name, name_pos)
            return Ap(name)
        if tok == "<end>":
            raise FormulaSyntaxError("unexpected end of formula", self.text, pos)
        raise FormulaSyntaxError(f"unexpected {tok!r}", self.text, pos)


def parse(text: str, declared: Iterable[str] | Iterable[AtomicProp] | None = None) -> Formula:
    """Parse formula text; ``declared`` (names or propositions) restricts ``ap(...)`` names."""
    names = None
    if declared is not None:
        names = frozenset(a.name if isinstance(a, AtomicProp) else a for a in declared)
    return _Parser(text, names).formula()


def interval_around(center: float, radius: float) -> ProbInterval:
    """Closed interval ``[center - radius, center + radius]`` clipped to ``[0, 1]``."""
    return ProbInterval.closed(max(0.0, center - radius), min(1.0, center + radius))


INV_SQRT2 = 1 / math.sqrt(2)
