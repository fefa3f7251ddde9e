"""Three-valued approximate model checking of a periodically stable chain.

The trajectory is abstracted by a lasso language: exact labels for the first
``K`` steps, then the symbolic neighborhoods of the limit cycle repeated
forever. Emptiness of the intersection with the formula gives ``False``;
emptiness of the intersection with the negated formula gives ``True``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import automata, spectral
from .linalg import DEFAULT_TOL, QMC, ComplexMatrix, Tolerances, validate_state
from .mltl import AtomicProp, Formula, Not, UnknownPropositionError, ap_names, label
from .neighborhood import Mode, SymbolSet, neighborhood

log = logging.getLogger(__name__)


class Value(str, enum.Enum):
    TRUE = "True"
    FALSE = "False"
    UNKNOWN = "Unknown"

    @property
    def definite(self) -> bool:
        return self is not Value.UNKNOWN


class KSource(str, enum.Enum):
    MIN = "min"
    ANALYTIC = "analytic"
    SIMULATED = "simulated"


@dataclass(frozen=True)
class CheckOptions:
    """Knobs for one check.

    ``tighten_prefix`` shortens the exact prefix to end right after the last
    step whose label falls outside the neighborhood of its limit state.
    Every later label lies in that neighborhood anyway, so the language still
    contains the true trace.
    """

    mode: Mode = Mode.CHEAP
    q_max: int = 64
    tol: Tolerances = DEFAULT_TOL
    k_source: KSource = KSource.MIN
    tighten_prefix: bool = True
    safety_margin: float = 0.9
    confirm_cycles: int = 3
    n_max: int = 200_000
    formula_aps_only: bool = True
    export_dir: Path | None = None


@dataclass(eq=False)
class ChainAnalysis:
    """Spectral data, stability report and limit cycle of one chain, plus a trajectory cache."""

    qmc: QMC
    spectral: spectral.SpectralData
    report: spectral.StabilityReport
    states: list[ComplexMatrix]
    _trajectory: list[ComplexMatrix] = field(default_factory=list, repr=False)
    _k_sim: dict = field(default_factory=dict, repr=False)

    @classmethod
    def of(cls, g: QMC, options: CheckOptions = CheckOptions()) -> ChainAnalysis:
        sd = spectral.decompose(g.transition, options.tol)
        report = spectral.check_stability(g, options.q_max, options.tol, sd)
        report.require_stable()
        return cls(g, sd, report, spectral.stable_states(g, report, sd))

    @property
    def period(self) -> int:
        return self.report.period

    def state(self, n: int) -> ComplexMatrix:
        traj = self._trajectory
        if not traj:
            traj.append(np.array(self.qmc.initial))
        while len(traj) <= n:
            traj.append(self.qmc.transition(traj[-1]))
        return traj[n]

    def k_simulated(self, eps: float, options: CheckOptions) -> int:
        key = (eps, options.safety_margin, options.confirm_cycles, options.n_max)
        if key not in self._k_sim:
            self._k_sim[key] = spectral.truncation_bound_simulated(
                self.qmc, self.states, eps, options.n_max, options.safety_margin, options.confirm_cycles
            )
        return self._k_sim[key]


@dataclass(frozen=True)
class Verdict:
    value: Value
    epsilon: float
    k_eps: int
    period: int
    k_source: str
    k_analytic: int | None
    k_simulated: int | None
    k_distance: int
    language: automata.LassoLanguage = field(repr=False)
    counterexample: automata.Witness | None = None
    history: tuple[tuple[float, Value], ...] = ()

    @property
    def prefix_length(self) -> int:
        return len(self.language.prefix)

    @property
    def cycle(self) -> tuple[SymbolSet, ...]:
        return self.language.cycle

    def to_json(self) -> dict:
        out = {
            "verdict": self.value.value,
            "epsilon": self.epsilon,
            "period": self.period,
            "k_eps": self.k_eps,
            "k_source": self.k_source,
            "k_analytic": self.k_analytic,
            "k_simulated": self.k_simulated,
            "cycle": [s.to_json() for s in self.cycle],
        }
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample.to_json()
        if self.history:
            out["history"] = [{"epsilon": e, "verdict": v.value} for e, v in self.history]
        return out


def _resolve_aps(aps: Sequence[AtomicProp], phi: Formula, options: CheckOptions) -> list[AtomicProp]:
    by_name = {a.name: a for a in aps}
    used = ap_names(phi)
    for name in sorted(used):
        if name not in by_name:
            raise UnknownPropositionError(name, -1)
    if options.formula_aps_only:
        return [by_name[n] for n in sorted(used)]
    return list(aps)


def _distance_bound(analysis: ChainAnalysis, eps: float, options: CheckOptions) -> tuple[int, str, int | None, int | None]:
    k_an = k_sim = None
    if options.k_source in (KSource.MIN, KSource.ANALYTIC):
        try:
            k_an = spectral.truncation_bound(analysis.spectral, analysis.report, eps)
        except spectral.TruncationUnavailable as exc:
            log.info("analytic truncation bound unavailable: %s", exc)
    if options.k_source in (KSource.MIN, KSource.SIMULATED):
        try:
            k_sim = analysis.k_simulated(eps, options)
        except spectral.TruncationUnavailable as exc:
            log.info("simulated truncation bound unavailable: %s", exc)
    candidates = [(k, src) for k, src in ((k_an, "analytic"), (k_sim, "simulated")) if k is not None]
    if not candidates:
        raise spectral.TruncationUnavailable(f"no truncation bound for epsilon={eps:g}")
    k, src = min(candidates)
    return k, src, k_an, k_sim


def build_language(
    analysis: ChainAnalysis,
    aps: Sequence[AtomicProp],
    eps: float,
    options: CheckOptions = CheckOptions(),
) -> tuple[automata.LassoLanguage, int, str, int | None, int | None]:
    """Lasso abstraction of the labelled trajectory at precision ``eps``."""
    k_dist, src, k_an, k_sim = _distance_bound(analysis, eps, options)
    p = analysis.period
    hoods = [neighborhood(eta, eps, aps, options.mode, options.tol) for eta in analysis.states]
    labels = [label(analysis.state(n), aps, options.tol) for n in range(k_dist)]
    k = k_dist
    if options.tighten_prefix:
        outside = [n for n, lt in enumerate(labels) if lt not in hoods[n % p]]
        k = outside[-1] + 1 if outside else 0
    universe = frozenset(a.name for a in aps)
    cycle = tuple(hoods[(k + i) % p] for i in range(p))
    lang = automata.LassoLanguage(tuple(labels[:k]), cycle, universe)
    return lang, k_dist, src, k_an, k_sim


def _export(directory: Path, phi: Formula, a_phi, a_neg, a_g) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    a_phi.export(directory / "formula.hoa", str(phi))
    a_neg.export(directory / "negated_formula.hoa", str(Not(phi)))
    a_g.export(directory / "trajectory.hoa", "lasso")


def model_check(
    g: QMC,
    aps: Sequence[AtomicProp],
    phi: Formula,
    epsilon: float,
    options: CheckOptions = CheckOptions(),
    analysis: ChainAnalysis | None = None,
) -> Verdict:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    analysis = analysis if analysis is not None else ChainAnalysis.of(g, options)
    used = _resolve_aps(aps, phi, options)
    lang, k_dist, src, k_an, k_sim = build_language(analysis, used, epsilon, options)
    a_g = automata.lasso_to_nba(lang)
    a_phi = automata.ltl_to_nba(phi)
    if options.export_dir is not None:
        _export(Path(options.export_dir), phi, a_phi, automata.ltl_to_nba(Not(phi)), a_g)

    common = dict(
        epsilon=epsilon,
        k_eps=len(lang.prefix),
        period=analysis.period,
        k_source=src,
        k_analytic=k_an,
        k_simulated=k_sim,
        k_distance=k_dist,
        language=lang,
    )
    if automata.product_empty(a_g, a_phi).empty:
        # Every word of the abstraction violates phi; report one of them.
        witness = automata.product_empty(a_g, automata.universal_nba()).witness
        return Verdict(Value.FALSE, counterexample=witness, **common)
    if automata.check_inclusion_via_negation(a_g, phi).empty:
        return Verdict(Value.TRUE, **common)
    return Verdict(Value.UNKNOWN, **common)


def model_check_refined(
    g: QMC,
    aps: Sequence[AtomicProp],
    phi: Formula,
    epsilon0: float,
    max_halvings: int = 8,
    options: CheckOptions = CheckOptions(),
    analysis: ChainAnalysis | None = None,
) -> Verdict:
    """Halve epsilon until the verdict is definite or ``max_halvings`` halvings were tried."""
    analysis = analysis if analysis is not None else ChainAnalysis.of(g, options)
    history = []
    eps = epsilon0
    for i in range(max_halvings + 1):
        verdict = model_check(g, aps, phi, eps, options, analysis)
        history.append((eps, verdict.value))
        if verdict.value.definite or i == max_halvings:
            break
        eps /= 2
    return replace(verdict, history=tuple(history))


def trajectory(g: QMC, n: int, check: bool = True) -> list[ComplexMatrix]:
    """``[rho0, E(rho0), ..., E^(n-1)(rho0)]``, each state validated when ``check`` is set."""
    if n < 0:
        raise ValueError("n must be non-negative")
    out = []
    rho = np.array(g.initial)
    for _ in range(n):
        if check:
            validate_state(rho).raise_if_invalid()
        out.append(rho)
        rho = g.transition(rho)
    return out
