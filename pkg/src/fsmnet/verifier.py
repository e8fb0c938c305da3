"""Explicit-state CTL model checking of FSM definitions.

``build_model`` turns an FsmDef into a Kripke structure: exogenous variables
move freely, endogenous ones take their transition function evaluated on the
current state. The environment is assumed fair: every value of every
exogenous variable recurs infinitely often on admissible paths (justice
constraints). Without this, ``A [ policy = policy_2 U infected ]`` would fail
on the path where no host is ever reported infected.

Models built by hand may carry no fairness at all, in which case checking is
plain CTL.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Sequence, Tuple

from .ctl import (AF, AG, AU, AX, EF, EG, EU, EX, And, Atom, Const, Formula, Implies, Not, Or,
                  parse_ctl)
from .fsm import BoolType, FiniteSet, FsmDef, format_fsm_value, validate
from .policy import Named


class UnknownAtom(ValueError):
    def __init__(self, var: str, value: Any = None):
        what = var if value is None else f"{var} = {value}"
        super().__init__(f"unknown atom {what}")
        self.var = var
        self.value = value


def _bool_aliases() -> Dict[str, bool]:
    return {"TRUE": True, "true": True, "True": True, "1": True,
            "FALSE": False, "false": False, "False": False, "0": False}


@dataclass
class KripkeModel:
    variables: Tuple[str, ...]
    domains: Dict[str, Tuple[Any, ...]]
    states: List[Tuple[Any, ...]]
    initial: int
    successors: List[Tuple[int, ...]]
    fairness: Tuple[FrozenSet[int], ...] = ()
    aliases: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def __post_init__(self):
        self._index = {s: i for i, s in enumerate(self.states)}
        self._pos = {v: i for i, v in enumerate(self.variables)}

    def index(self, valuation: Tuple[Any, ...]) -> int:
        return self._index[valuation]

    def value(self, state: int, var: str) -> Any:
        return self.states[state][self._pos[var]]

    def valuation(self, state: int) -> Dict[str, Any]:
        return dict(zip(self.variables, self.states[state]))

    def resolve(self, var: str, value: Any) -> Any:
        """Map an atom's value token to a domain value."""
        if var not in self._pos:
            raise UnknownAtom(var)
        domain = self.domains[var]
        for d in domain:
            if type(d) is type(value) and d == value:
                return d
        if isinstance(value, str):
            table = self.aliases.get(var) or (
                _bool_aliases() if all(isinstance(d, bool) for d in domain) else {})
            if value in table:
                return table[value]
            for d in domain:
                if not isinstance(d, bool) and str(d) == value:
                    return d
        raise UnknownAtom(var, value)

    def predecessors(self) -> List[List[int]]:
        pred: List[List[int]] = [[] for _ in self.states]
        for s, succ in enumerate(self.successors):
            for t in succ:
                pred[t].append(s)
        return pred


def _value_order(vtype) -> tuple:
    return tuple(vtype.values)


def build_model(fsm_def: FsmDef) -> KripkeModel:
    validate(fsm_def)
    names = fsm_def.names
    domains = {v.name: _value_order(v.vtype) for v in fsm_def.variables}
    states = list(itertools.product(*(domains[n] for n in names)))
    index = {s: i for i, s in enumerate(states)}
    exo = [i for i, v in enumerate(fsm_def.variables) if v.exogenous]
    successors: List[Tuple[int, ...]] = []
    for s in states:
        val = dict(zip(names, s))
        nxt = list(s)
        for i, v in enumerate(fsm_def.variables):
            if not v.exogenous:
                nxt[i] = v.next_value(val)
        succ = []
        for choice in itertools.product(*(domains[names[i]] for i in exo)):
            for i, c in zip(exo, choice):
                nxt[i] = c
            succ.append(index[tuple(nxt)])
        successors.append(tuple(sorted(set(succ))))
    initial = index[tuple(v.init for v in fsm_def.variables)]
    fairness = []
    for i in exo:
        for value in domains[names[i]]:
            fairness.append(frozenset(k for k, s in enumerate(states) if s[i] == value))
    aliases: Dict[str, Dict[str, Any]] = {}
    for v in fsm_def.variables:
        if isinstance(v.vtype, FiniteSet):
            table: Dict[str, Any] = {}
            for k, member in enumerate(v.vtype.members, start=1):
                table[member.name] = member
                table[f"{v.name}_{k}"] = member
            aliases[v.name] = table
        elif isinstance(v.vtype, BoolType):
            aliases[v.name] = _bool_aliases()
    return KripkeModel(names, domains, states, initial, successors, tuple(fairness), aliases)


def reachable(m: KripkeModel) -> FrozenSet[int]:
    seen = {m.initial}
    queue = deque([m.initial])
    while queue:
        s = queue.popleft()
        for t in m.successors[s]:
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return frozenset(seen)


@dataclass(frozen=True)
class ReachStats:
    count: int
    log2: float
    diameter: int
    total: int


def reachable_stats(m: KripkeModel) -> ReachStats:
    """Reachable-state count and diameter as image iterations to fixpoint.

    The saturating iteration that adds nothing is counted, so a model whose
    deepest state sits at BFS depth ``d`` has diameter ``d + 1``.
    """
    reached = {m.initial}
    frontier = {m.initial}
    iterations = 0
    while True:
        iterations += 1
        image = {t for s in frontier for t in m.successors[s]} - reached
        if not image:
            break
        reached |= image
        frontier = image
    count = len(reached)
    return ReachStats(count, round(math.log2(count), 5), iterations, len(m.states))


# -- checking -------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    holds: bool
    trace: Tuple[Dict[str, Any], ...] = ()
    trace_states: Tuple[int, ...] = ()


class _Checker:
    def __init__(self, m: KripkeModel):
        self.m = m
        self.R = reachable(m)
        self.pred = m.predecessors()
        self.cache: Dict[Formula, FrozenSet[int]] = {}
        self.fair_sets = tuple(F & self.R for F in m.fairness)
        self.fair = self._eg_fair(self.R) if self.fair_sets else self.R

    def pre(self, target: FrozenSet[int]) -> FrozenSet[int]:
        out = set()
        for t in target:
            for s in self.pred[t]:
                if s in self.R:
                    out.add(s)
        return frozenset(out)

    def _eu_plain(self, f: FrozenSet[int], g: FrozenSet[int]) -> FrozenSet[int]:
        Z = set(g)
        frontier = set(g)
        while frontier:
            new = set()
            for t in frontier:
                for s in self.pred[t]:
                    if s in f and s not in Z and s in self.R:
                        new.add(s)
            Z |= new
            frontier = new
        return frozenset(Z)

    def _eg_plain(self, f: FrozenSet[int]) -> FrozenSet[int]:
        Z = set(f)
        while True:
            nxt = {s for s in Z if any(t in Z for t in self.m.successors[s])}
            if nxt == Z:
                return frozenset(Z)
            Z = nxt

    def _eg_fair(self, f: FrozenSet[int]) -> FrozenSet[int]:
        # Emerson-Lei: Z = f & AND_i EX E[f U (Z & F_i)]
        Z = frozenset(f)
        while True:
            nxt = Z
            for F in self.fair_sets:
                nxt = nxt & self.pre(self._eu_plain(f, Z & F))
            nxt = nxt & f
            if nxt == Z:
                return Z
            Z = nxt

    def sat(self, f: Formula) -> FrozenSet[int]:
        hit = self.cache.get(f)
        if hit is None:
            hit = self._sat(f)
            self.cache[f] = hit
        return hit

    def _sat(self, f: Formula) -> FrozenSet[int]:
        R = self.R
        if isinstance(f, Const):
            return R if f.value else frozenset()
        if isinstance(f, Atom):
            value = self.m.resolve(f.var, f.value)
            return frozenset(s for s in R if self.m.value(s, f.var) == value)
        if isinstance(f, Not):
            return R - self.sat(f.arg)
        if isinstance(f, And):
            return self.sat(f.left) & self.sat(f.right)
        if isinstance(f, Or):
            return self.sat(f.left) | self.sat(f.right)
        if isinstance(f, Implies):
            return (R - self.sat(f.left)) | self.sat(f.right)
        if isinstance(f, EX):
            return self.pre(self.sat(f.arg) & self.fair)
        if isinstance(f, EU):
            return self._eu_plain(self.sat(f.left), self.sat(f.right) & self.fair)
        if isinstance(f, EF):
            return self._eu_plain(R, self.sat(f.arg) & self.fair)
        if isinstance(f, EG):
            arg = self.sat(f.arg)
            return self._eg_fair(arg) if self.fair_sets else self._eg_plain(arg)
        if isinstance(f, AX):
            return R - self.sat(EX(Not(f.arg)))
        if isinstance(f, AF):
            return R - self.sat(EG(Not(f.arg)))
        if isinstance(f, AG):
            return R - self.sat(EF(Not(f.arg)))
        if isinstance(f, AU):
            a, b = f.left, f.right
            bad = Or(EU(Not(b), And(Not(a), Not(b))), EG(Not(b)))
            return R - self.sat(bad)
        raise TypeError(f"not a formula: {f!r}")

    # -- traces

    def _path_to(self, start: int, inside: FrozenSet[int], goal: FrozenSet[int]) -> List[int]:
        """Shortest path from start through ``inside`` states to a ``goal`` state."""
        if start in goal:
            return [start]
        parent = {start: None}
        queue = deque([start])
        while queue:
            s = queue.popleft()
            if s not in inside:
                continue
            for t in self.m.successors[s]:
                if t in parent or t not in self.R:
                    continue
                parent[t] = s
                if t in goal:
                    path = [t]
                    while parent[path[-1]] is not None:
                        path.append(parent[path[-1]])
                    return path[::-1]
                queue.append(t)
        return [start]

    def _lasso(self, start: int, inside: FrozenSet[int]) -> List[int]:
        path = [start]
        seen = {start}
        s = start
        while True:
            nxt = [t for t in self.m.successors[s] if t in inside]
            if not nxt:
                return path
            s = nxt[0]
            path.append(s)
            if s in seen:
                return path
            seen.add(s)

    def witness(self, s: int, f: Formula) -> List[int]:
        """A path from ``s`` showing why the existential-normal-form ``f`` holds there."""
        if not isinstance(f, (EX, EU, EF, EG, And, Or)):
            return [s]
        if isinstance(f, EX):
            targets = [t for t in self.m.successors[s] if t in self.sat(f.arg) and t in self.fair]
            if not targets:
                return [s]
            return [s] + self.witness(targets[0], f.arg)
        if isinstance(f, (EU, EF)):
            left = self.R if isinstance(f, EF) else self.sat(f.left)
            right = f.arg if isinstance(f, EF) else f.right
            path = self._path_to(s, left, self.sat(right) & self.fair)
            return path[:-1] + self.witness(path[-1], right)
        if isinstance(f, EG):
            return self._lasso(s, self.sat(f))
        if isinstance(f, Or):
            branch = f.left if s in self.sat(f.left) else f.right
            return self.witness(s, branch)
        # And: follow whichever conjunct carries a temporal explanation
        best = [s]
        for part in (f.left, f.right):
            w = self.witness(s, part)
            if len(w) > len(best):
                best = w
        return best


def negate(f: Formula) -> Formula:
    """Push a negation inward, turning universal operators into existential ones."""
    if isinstance(f, Not):
        return f.arg
    if isinstance(f, Const):
        return Const(not f.value)
    if isinstance(f, And):
        return Or(negate(f.left), negate(f.right))
    if isinstance(f, Or):
        return And(negate(f.left), negate(f.right))
    if isinstance(f, Implies):
        return And(f.left, negate(f.right))
    if isinstance(f, AX):
        return EX(negate(f.arg))
    if isinstance(f, AG):
        return EF(negate(f.arg))
    if isinstance(f, AF):
        return EG(negate(f.arg))
    if isinstance(f, AU):
        nb = negate(f.right)
        return Or(EU(nb, And(negate(f.left), nb)), EG(nb))
    return Not(f)


def _normalize(f: Formula) -> Formula:
    """Existential normal form used for witness extraction."""
    if isinstance(f, Not):
        inner = f.arg
        if isinstance(inner, (Atom, Const)):
            return f
        if isinstance(inner, (EX, EU, EF, EG)):
            # a negated existential is universal: no single witness path
            return Not(_normalize(inner))
        return _normalize(negate(inner))
    if isinstance(f, (And, Or)):
        return type(f)(_normalize(f.left), _normalize(f.right))
    if isinstance(f, Implies):
        return Or(_normalize(negate(f.left)), _normalize(f.right))
    if isinstance(f, (EX, EF, EG)):
        return type(f)(_normalize(f.arg))
    if isinstance(f, EU):
        return EU(_normalize(f.left), _normalize(f.right))
    return f


def check(m: KripkeModel, f: Formula | str) -> CheckResult:
    """Check ``f`` at the initial state.

    A false universal property comes with a counterexample path; a true
    existential one with a witness path.
    """
    if isinstance(f, str):
        f = parse_ctl(f)
    checker = _Checker(m)
    holds = m.initial in checker.sat(f)
    target = f if holds else negate(f)
    target = _normalize(target)
    if m.initial in checker.sat(target):
        path = checker.witness(m.initial, target)
    else:
        path = [m.initial]
    return CheckResult(holds, tuple(m.valuation(s) for s in path), tuple(path))


def satisfying_states(m: KripkeModel, f: Formula | str) -> FrozenSet[int]:
    if isinstance(f, str):
        f = parse_ctl(f)
    return _Checker(m).sat(f)


# -- preamble -------------------------------------------------------------------

def _log2_text(n: int) -> str:
    return f"{math.log2(n):g}"


def _display(value: Any) -> str:
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, Named):
        return value.name
    return format_fsm_value(value)


@dataclass(frozen=True)
class SpecResult:
    text: str
    result: CheckResult


def verify(m: KripkeModel, specs: Iterable[str]) -> List[SpecResult]:
    return [SpecResult(" ".join(text.split()), check(m, parse_ctl(text))) for text in specs]


def format_trace(m: KripkeModel, result: CheckResult) -> List[str]:
    lines = ["-- as demonstrated by the following execution sequence"]
    for k, state in enumerate(result.trace, start=1):
        lines.append(f"  -> State: 1.{k} <-")
        for var in m.variables:
            lines.append(f"    {var} = {_display(state[var])}")
    return lines


def format_preamble(m: KripkeModel, results: Sequence[SpecResult],
                    with_traces: bool = True) -> List[str]:
    lines = []
    for r in results:
        lines.append(f"-- specification {r.text} is {'true' if r.result.holds else 'false'}")
        if with_traces and not r.result.holds:
            lines.extend(format_trace(m, r.result))
    stats = reachable_stats(m)
    lines.append(f"system diameter: {stats.diameter}")
    lines.append(f"reachable states: {stats.count} (2^{_log2_text(stats.count)}) "
                 f"out of {stats.total} (2^{_log2_text(stats.total)})")
    lines.append("===== NuSMV Output End =====")
    return lines
