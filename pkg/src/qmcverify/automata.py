"""Buchi automata over the alphabet ``2^AP`` with symbolic guards.

A guard is a cube: a set of propositions that must be present and a set that
must be absent. Formulas are translated with the on-the-fly tableau of
Gerth, Peled, Vardi and Wolper followed by counter degeneralization.
Emptiness of products uses strongly connected components from networkx.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import count
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import networkx as nx

from .mltl import FALSE, And, Ap, Formula, Next, Not, Or, Release, TrueF, Until, nnf
from .neighborhood import SymbolSet


@dataclass(frozen=True)
class Guard:
    pos: frozenset[str] = frozenset()
    neg: frozenset[str] = frozenset()

    @property
    def satisfiable(self) -> bool:
        return not (self.pos & self.neg)

    def matches(self, letter: Iterable[str]) -> bool:
        lt = frozenset(letter)
        return self.pos <= lt and not (self.neg & lt)

    def __and__(self, other: Guard) -> Guard:
        return Guard(self.pos | other.pos, self.neg | other.neg)

    def witness(self) -> frozenset[str]:
        """The smallest letter satisfying the guard."""
        return self.pos

    @classmethod
    def letter(cls, letter: Iterable[str], universe: Iterable[str]) -> Guard:
        lt = frozenset(letter)
        return cls(lt, frozenset(universe) - lt)

    @classmethod
    def of_symbols(cls, symbols: SymbolSet) -> Guard:
        return cls(symbols.base, symbols.excluded)

    def __str__(self) -> str:
        lits = sorted(self.pos) + [f"!{a}" for a in sorted(self.neg)]
        return " & ".join(lits) if lits else "true"


TOP = Guard()


@dataclass(frozen=True, eq=False)
class NBA:
    """States are ``0 .. n_states - 1``; ``edges[q]`` lists ``(guard, target)``."""

    n_states: int
    initial: frozenset[int]
    edges: tuple[tuple[tuple[Guard, int], ...], ...]
    accepting: frozenset[int]

    def __post_init__(self) -> None:
        if len(self.edges) != self.n_states:
            raise ValueError("one edge list per state is required")
        if not self.accepting <= frozenset(range(self.n_states)):
            raise ValueError("accepting states must be states")
        for out in self.edges:
            for g, _ in out:
                if not g.satisfiable:
                    raise ValueError(f"unsatisfiable guard {g}")

    @property
    def propositions(self) -> frozenset[str]:
        return frozenset(a for out in self.edges for g, _ in out for a in g.pos | g.neg)

    def n_transitions(self) -> int:
        return sum(len(out) for out in self.edges)

    def accepts(self, stem: Sequence[Iterable[str]], loop: Sequence[Iterable[str]]) -> bool:
        """Membership of the ultimately periodic word ``stem loop^omega``."""
        if not loop:
            raise ValueError("loop must be nonempty")
        stem_l = [frozenset(x) for x in stem]
        loop_l = [frozenset(x) for x in loop]
        current = set(self.initial)
        for letter in stem_l:
            current = {t for q in current for g, t in self.edges[q] if g.matches(letter)}
        # Product with the loop positions; accept iff an accepting cycle is reachable.
        graph = nx.DiGraph()
        starts = [(q, 0) for q in current]
        seen = set(starts)
        todo = deque(starts)
        graph.add_nodes_from(starts)
        p = len(loop_l)
        while todo:
            q, i = todo.popleft()
            for g, t in self.edges[q]:
                if g.matches(loop_l[i]):
                    nxt = (t, (i + 1) % p)
                    graph.add_edge((q, i), nxt)
                    if nxt not in seen:
                        seen.add(nxt)
                        todo.append(nxt)
        for scc in nx.strongly_connected_components(graph):
            if _nontrivial(graph, scc) and any(q in self.accepting for q, _ in scc):
                return True
        return False

    def to_hoa(self, name: str = "") -> str:
        aps = sorted(self.propositions)
        index = {a: i for i, a in enumerate(aps)}

        def label(g: Guard) -> str:
            lits = [str(index[a]) for a in sorted(g.pos)] + [f"!{index[a]}" for a in sorted(g.neg)]
            return "&".join(lits) if lits else "t"

        lines = ["HOA: v1"]
        if name:
            lines.append(f'name: "{name}"')
        lines.append(f"States: {self.n_states}")
        lines += [f"Start: {q}" for q in sorted(self.initial)]
        lines.append(f"AP: {len(aps)}" + "".join(f' "{a}"' for a in aps))
        lines += ["acc-name: Buchi", "Acceptance: 1 Inf(0)", "properties: state-acc", "--BODY--"]
        for q in range(self.n_states):
            lines.append(f"State: {q}" + (" {0}" if q in self.accepting else ""))
            lines += [f"[{label(g)}] {t}" for g, t in self.edges[q]]
        lines.append("--END--")
        return "\n".join(lines) + "\n"

    def export(self, path: str | Path, name: str = "") -> None:
        Path(path).write_text(self.to_hoa(name))


def _nontrivial(graph: nx.DiGraph, scc: set) -> bool:
    if len(scc) > 1:
        return True
    (v,) = scc
    return graph.has_edge(v, v)


class _Builder:
    def __init__(self) -> None:
        self.ids: dict[Hashable, int] = {}
        self.edges: list[list[tuple[Guard, int]]] = []

    def state(self, key: Hashable) -> int:
        if key not in self.ids:
            self.ids[key] = len(self.edges)
            self.edges.append([])
        return self.ids[key]

    def edge(self, src: int, guard: Guard, dst: int) -> None:
        if guard.satisfiable and (guard, dst) not in self.edges[src]:
            self.edges[src].append((guard, dst))

    def build(self, initial: Iterable[int], accepting: Iterable[int]) -> NBA:
        return NBA(len(self.edges), frozenset(initial), tuple(tuple(e) for e in self.edges), frozenset(accepting))


# --- formula translation ---------------------------------------------------


@dataclass
class _Node:
    name: int
    incoming: set[int]
    new: set[Formula]
    old: set[Formula] = field(default_factory=set)
    nxt: set[Formula] = field(default_factory=set)


_INIT = -1


def _is_literal(f: Formula) -> bool:
    return isinstance(f, (TrueF, Ap)) or (isinstance(f, Not) and isinstance(f.arg, (TrueF, Ap)))


def _negate_literal(f: Formula) -> Formula:
    return f.arg if isinstance(f, Not) else Not(f)


def _tableau(phi: Formula) -> list[_Node]:
    """Return the closed node set of the GPVW construction for an NNF formula."""
    fresh = count()
    done: list[_Node] = []
    stack = [_Node(next(fresh), {_INIT}, {phi})]
    while stack:
        node = stack.pop()
        if not node.new:
            twin = next((n for n in done if n.old == node.old and n.nxt == node.nxt), None)
            if twin is not None:
                twin.incoming |= node.incoming
            else:
                done.append(node)
                stack.append(_Node(next(fresh), {node.name}, set(node.nxt)))
            continue
        eta = node.new.pop()
        if eta in node.old:
            stack.append(node)
            continue
        if _is_literal(eta):
            if eta == FALSE or _negate_literal(eta) in node.old:
                continue
            node.old.add(eta)
            stack.append(node)
        elif isinstance(eta, And):
            node.new |= {eta.left, eta.right} - node.old
            node.old.add(eta)
            stack.append(node)
        elif isinstance(eta, Next):
            node.old.add(eta)
            node.nxt.add(eta.arg)
            stack.append(node)
        elif isinstance(eta, (Or, Until, Release)):
            if isinstance(eta, Or):
                first, first_next, second = {eta.left}, set(), {eta.right}
            elif isinstance(eta, Until):
                first, first_next, second = {eta.left}, {eta}, {eta.right}
            else:
                first, first_next, second = {eta.right}, {eta}, {eta.left, eta.right}
            old = node.old | {eta}
            n1 = _Node(next(fresh), set(node.incoming), node.new | (first - old), set(old), node.nxt | first_next)
            n2 = _Node(next(fresh), set(node.incoming), node.new | (second - old), set(old), set(node.nxt))
            stack += [n2, n1]
        else:
            raise TypeError(f"formula not in negation normal form: {eta}")
    return done


def _literal_guard(old: Iterable[Formula]) -> Guard:
    pos = frozenset(f.name for f in old if isinstance(f, Ap))
    neg = frozenset(f.arg.name for f in old if isinstance(f, Not) and isinstance(f.arg, Ap))
    return Guard(pos, neg)


@lru_cache(maxsize=256)
def ltl_to_nba(phi: Formula) -> NBA:
    """Buchi automaton accepting exactly the words satisfying ``phi``."""
    f = nnf(phi)
    nodes = _tableau(f)
    untils = sorted({g for n in nodes for g in n.old if isinstance(g, Until)}, key=str)
    acc_sets = [
        frozenset(n.name for n in nodes if u not in n.old or u.right in n.old) for u in untils
    ] or [frozenset(n.name for n in nodes)]
    k = len(acc_sets)
    by_name = {n.name: n for n in nodes}
    guards = {n.name: _literal_guard(n.old) for n in nodes}
    succ: dict[int, list[int]] = {_INIT: []}
    for n in nodes:
        succ.setdefault(n.name, [])
    for n in nodes:
        for src in n.incoming:
            if src == _INIT or src in by_name:
                succ[src].append(n.name)

    # Degeneralize: the counter moves on when leaving a state of the current set.
    b = _Builder()
    init = b.state((_INIT, 0))
    accepting = []
    todo = deque([(_INIT, 0)])
    seen = {(_INIT, 0)}
    while todo:
        q, i = todo.popleft()
        src = b.state((q, i))
        if q != _INIT and q in acc_sets[i]:
            j = (i + 1) % k
            if i == 0:
                accepting.append(src)
        else:
            j = i
        for r in succ[q]:
            key = (r, j)
            b.edge(src, guards[r], b.state(key))
            if key not in seen:
                seen.add(key)
                todo.append(key)
    return b.build([init], accepting)


# --- lasso languages ---------------------------------------------------------


@dataclass(frozen=True)
class LassoLanguage:
    """``prefix[0] ... prefix[K-1] (cycle[0] ... cycle[p-1])^omega``."""

    prefix: tuple[frozenset[str], ...]
    cycle: tuple[SymbolSet, ...]
    universe: frozenset[str]

    def __post_init__(self) -> None:
        if not self.cycle:
            raise ValueError("the cycle of a lasso language must be nonempty")

    def contains(self, stem: Sequence[Iterable[str]], loop: Sequence[Iterable[str]]) -> bool:
        return lasso_to_nba(self).accepts(stem, loop)

    def to_json(self) -> dict:
        return {
            "prefix": [sorted(x) for x in self.prefix],
            "cycle": [s.to_json() for s in self.cycle],
        }


def lasso_to_nba(lang: LassoLanguage) -> NBA:
    """Chain of states for the prefix feeding an accepting cycle of symbol sets."""
    b = _Builder()
    k, p = len(lang.prefix), len(lang.cycle)
    states = [b.state(i) for i in range(k + p)]
    for i, letter in enumerate(lang.prefix):
        b.edge(states[i], Guard.letter(letter, lang.universe), states[i + 1])
    for c, sym in enumerate(lang.cycle):
        b.edge(states[k + c], Guard.of_symbols(sym), states[k + (c + 1) % p])
    return b.build([states[0]], [states[k]])


def universal_nba() -> NBA:
    return NBA(1, frozenset({0}), (((TOP, 0),),), frozenset({0}))


def empty_nba() -> NBA:
    return NBA(1, frozenset({0}), ((),), frozenset())


# --- products and emptiness --------------------------------------------------


@dataclass(frozen=True)
class Witness:
    """An ultimately periodic word ``stem loop^omega`` in the intersection."""

    stem: tuple[frozenset[str], ...]
    loop: tuple[frozenset[str], ...]

    def to_json(self) -> dict:
        return {"stem": [sorted(x) for x in self.stem], "loop": [sorted(x) for x in self.loop]}

    def __str__(self) -> str:
        fmt = lambda w: " ".join("{" + ",".join(sorted(x)) + "}" for x in w)  # noqa: E731
        return f"{fmt(self.stem)} ({fmt(self.loop)})^w"


@dataclass(frozen=True)
class EmptinessResult:
    empty: bool
    witness: Witness | None = None

    def __bool__(self) -> bool:
        return self.empty


def _product_graph(a: NBA, b: NBA) -> tuple[nx.DiGraph, list[tuple[int, int]]]:
    graph = nx.DiGraph()
    starts = [(p, q) for p in a.initial for q in b.initial]
    graph.add_nodes_from(starts)
    todo = deque(starts)
    seen = set(starts)
    while todo:
        p, q = todo.popleft()
        for g1, t1 in a.edges[p]:
            for g2, t2 in b.edges[q]:
                g = g1 & g2
                if not g.satisfiable:
                    continue
                nxt = (t1, t2)
                if not graph.has_edge((p, q), nxt):
                    graph.add_edge((p, q), nxt, guard=g)
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
    return graph, starts


def _path(graph: nx.DiGraph, sources: Iterable, targets: set, allowed: set | None = None) -> list:
    """Shortest node path from any source to any target (BFS)."""
    parent = {s: None for s in sources}
    todo = deque(parent)
    while todo:
        v = todo.popleft()
        if v in targets:
            path = [v]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        for w in graph.successors(v):
            if w not in parent and (allowed is None or w in allowed):
                parent[w] = v
                todo.append(w)
    raise AssertionError("target unreachable")


def _letters(graph: nx.DiGraph, path: Sequence) -> tuple[frozenset[str], ...]:
    return tuple(graph.edges[u, v]["guard"].witness() for u, v in zip(path, path[1:]))


def product_empty(a: NBA, b: NBA) -> EmptinessResult:
    """Decide ``L(a) & L(b) = {}``; otherwise return a lasso witness."""
    graph, starts = _product_graph(a, b)
    for scc in nx.strongly_connected_components(graph):
        if not _nontrivial(graph, scc):
            continue
        acc_a = {v for v in scc if v[0] in a.accepting}
        acc_b = {v for v in scc if v[1] in b.accepting}
        if not acc_a or not acc_b:
            continue
        stem = _path(graph, starts, acc_a)
        anchor = stem[-1]
        # Loop anchor -> some b-accepting state -> anchor, inside the component.
        out = [w for w in graph.successors(anchor) if w in scc]
        to_b = _path(graph, out, acc_b, scc)
        loop_nodes = [anchor] + to_b
        if to_b[-1] != anchor:
            loop_nodes += _path(graph, [to_b[-1]], {anchor}, scc)[1:]
        return EmptinessResult(False, Witness(_letters(graph, stem), _letters(graph, loop_nodes)))
    return EmptinessResult(True)


def check_inclusion_via_negation(a_g: NBA, phi: Formula) -> EmptinessResult:
    """``L(a_g)`` is inside the models of ``phi`` iff it misses every model of ``!phi``.

    The returned witness, if any, is a word of ``a_g`` violating ``phi``.
    """
    return product_empty(a_g, ltl_to_nba(Not(phi)))

