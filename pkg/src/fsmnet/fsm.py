"""Declarative FSMs over typed variables, instantiated per flow.

Each ``FsmVar`` is either exogenous (set by external events) or endogenous
(recomputed from other variables after every event). ``FsmPolicy`` keeps one
valuation per LPEC key and projects the ensemble into a single Policy.
"""
from __future__ import annotations

import graphlib
import threading
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from .gateway import Event
from .packet import FlowSpec, Packet
from .policy import Dynamic, IfThenElse, Named, Policy, identity


# -- types ----------------------------------------------------------------

@dataclass(frozen=True)
class BoolType:
    @property
    def values(self) -> tuple:
        return (False, True)

    def contains(self, value: Any) -> bool:
        return isinstance(value, bool)

    def resolve(self, value: Any) -> bool:
        if isinstance(value, bool):
            return value
        raise KeyError(value)


@dataclass(frozen=True)
class FiniteSet:
    members: Tuple[Named, ...]

    def __post_init__(self):
        if not self.members:
            raise ValueError("finite set needs at least one member")
        names = [m.name for m in self.members]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate member names in {names}")

    @property
    def values(self) -> tuple:
        return self.members

    def contains(self, value: Any) -> bool:
        return isinstance(value, Named) and value in self.members

    def resolve(self, value: Any) -> Named:
        """Accept a member or a member name."""
        for m in self.members:
            if m == value or m.name == value:
                return m
        raise KeyError(value)


VarType = Union[BoolType, FiniteSet]


# -- guards and targets -----------------------------------------------------

@dataclass(frozen=True)
class EventOccurred:
    pass


@dataclass(frozen=True)
class IsTrue:
    var: str


@dataclass(frozen=True)
class TestAndTrue:
    a: str
    b: str


@dataclass(frozen=True)
class Default:
    pass


Guard = Union[EventOccurred, IsTrue, TestAndTrue, Default]


@dataclass(frozen=True)
class EventValue:
    pass


@dataclass(frozen=True)
class Constant:
    value: Any


@dataclass(frozen=True)
class TransitionCase:
    guard: Guard
    target: Union[EventValue, Constant]


def occurred() -> EventOccurred:
    return EventOccurred()


def is_true(var: str) -> IsTrue:
    return IsTrue(var)


def test_and_true(a: str, b: str) -> TestAndTrue:
    return TestAndTrue(a, b)


def case(guard: Guard, target: Any) -> TransitionCase:
    if not isinstance(target, (EventValue, Constant)):
        target = Constant(target)
    return TransitionCase(guard, target)


def guard_vars(g: Guard) -> Tuple[str, ...]:
    if isinstance(g, IsTrue):
        return (g.var,)
    if isinstance(g, TestAndTrue):
        return (g.a, g.b)
    return ()


def guard_holds(g: Guard, valuation: Dict[str, Any], event_occurred: bool = False) -> bool:
    if isinstance(g, Default):
        return True
    if isinstance(g, EventOccurred):
        return event_occurred
    if isinstance(g, IsTrue):
        return valuation[g.var] is True
    if isinstance(g, TestAndTrue):
        return valuation[g.a] is True and valuation[g.b] is True
    raise TypeError(f"unknown guard {g!r}")


# -- definitions --------------------------------------------------------------

@dataclass(frozen=True)
class FsmVar:
    name: str
    vtype: VarType
    init: Any
    cases: Tuple[TransitionCase, ...] = ()

    @property
    def exogenous(self) -> bool:
        return any(isinstance(c.guard, EventOccurred) for c in self.cases)

    @property
    def depends_on(self) -> Tuple[str, ...]:
        out: List[str] = []
        for c in self.cases:
            for v in guard_vars(c.guard):
                if v not in out:
                    out.append(v)
        return tuple(out)

    def next_value(self, valuation: Dict[str, Any]) -> Any:
        """First satisfied case wins; with no satisfied case the value is kept."""
        for c in self.cases:
            if isinstance(c.guard, EventOccurred):
                continue
            if guard_holds(c.guard, valuation):
                return c.target.value
        return valuation[self.name]


@dataclass(frozen=True)
class FsmDef:
    variables: Tuple[FsmVar, ...]
    lpec_fields: Tuple[str, ...] = ("srcip",)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "lpec_fields", tuple(self.lpec_fields))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def var(self, name: str) -> FsmVar:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def initial_valuation(self) -> Dict[str, Any]:
        return {v.name: v.init for v in self.variables}


class ValidationError(ValueError):
    pass


class CyclicDependency(ValidationError):
    def __init__(self, path: Sequence[str]):
        super().__init__(f"cyclic dependency: {' -> '.join(path)}")
        self.path = list(path)


class InitNotInType(ValidationError):
    def __init__(self, var: str):
        super().__init__(f"initial value of {var!r} is not in its type")
        self.var = var


class MixedTransitionKinds(ValidationError):
    def __init__(self, var: str):
        super().__init__(f"variable {var!r} mixes event-driven and derived cases")
        self.var = var


class DuplicateVar(ValidationError):
    def __init__(self, name: str):
        super().__init__(f"duplicate variable {name!r}")
        self.name = name


class UnknownVariable(ValidationError):
    def __init__(self, var: str, ref: str):
        super().__init__(f"variable {var!r} refers to undefined {ref!r}")
        self.var = var
        self.ref = ref


class BadTarget(ValidationError):
    def __init__(self, var: str, reason: str):
        super().__init__(f"variable {var!r}: {reason}")
        self.var = var


def validate(fsm_def: FsmDef) -> None:
    """Raise a ValidationError subclass if the definition is malformed."""
    seen = set()
    for v in fsm_def.variables:
        if v.name in seen:
            raise DuplicateVar(v.name)
        seen.add(v.name)
    if not fsm_def.lpec_fields:
        raise ValidationError("lpec_fields must not be empty")
    for v in fsm_def.variables:
        if not v.vtype.contains(v.init):
            raise InitNotInType(v.name)
        kinds = {isinstance(c.guard, EventOccurred) for c in v.cases
                 if not isinstance(c.guard, Default)}
        if len(kinds) > 1:
            raise MixedTransitionKinds(v.name)
        for ref in v.depends_on:
            if ref not in seen:
                raise UnknownVariable(v.name, ref)
            if not isinstance(fsm_def.var(ref).vtype, BoolType):
                raise BadTarget(v.name, f"guard variable {ref!r} is not boolean")
        for c in v.cases:
            if isinstance(c.target, EventValue):
                if not isinstance(c.guard, EventOccurred):
                    raise BadTarget(v.name, "event value target without an event guard")
            elif not v.vtype.contains(c.target.value):
                raise BadTarget(v.name, f"target {c.target.value!r} is not in the variable type")
    topo_order(fsm_def)


def topo_order(fsm_def: FsmDef) -> Tuple[str, ...]:
    """Endogenous variables, dependencies first; ties broken by definition order."""
    endo = [v for v in fsm_def.variables if not v.exogenous]
    endo_names = {v.name for v in endo}
    sorter = graphlib.TopologicalSorter()
    for v in endo:
        sorter.add(v.name, *[d for d in v.depends_on if d in endo_names])
    try:
        sorter.prepare()
    except graphlib.CycleError as exc:
        cycle = list(exc.args[1])[:-1]
        position = {n: i for i, n in enumerate(fsm_def.names)}
        start = min(range(len(cycle)), key=lambda i: position[cycle[i]])
        raise CyclicDependency(cycle[start:] + cycle[:start]) from None
    order = {n: i for i, n in enumerate(fsm_def.names)}
    out: List[str] = []
    while sorter.is_active():
        ready = sorted(sorter.get_ready(), key=order.__getitem__)
        out.extend(ready)
        sorter.done(*ready)
    return tuple(out)


def exogenous_vars(fsm_def: FsmDef) -> Tuple[str, ...]:
    return tuple(v.name for v in fsm_def.variables if v.exogenous)


# -- runtime ------------------------------------------------------------------

class FsmRuntimeError(ValueError):
    pass


class UnknownEvent(FsmRuntimeError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name


class TypeMismatch(FsmRuntimeError):
    def __init__(self, name: str, value: Any):
        super().__init__(f"{value!r} is not a valid value for {name!r}")
        self.name = name
        self.value = value


class MissingLpecField(FsmRuntimeError):
    def __init__(self, field_name: str):
        super().__init__(field_name)
        self.field = field_name


def format_fsm_value(value: Any) -> str:
    if isinstance(value, Named):
        return value.name
    return str(value)


@dataclass
class FsmInstance:
    key: FlowSpec
    valuation: Dict[str, Any]


@dataclass(frozen=True)
class StateReport:
    event_name: str
    event_value: Any
    flow: FlowSpec
    valuation: Tuple[Tuple[str, Any], ...]

    def state_text(self) -> str:
        return "{" + ", ".join(f"'{k}': {format_fsm_value(v)}" for k, v in self.valuation) + "}"

    def lines(self) -> List[str]:
        value = format_fsm_value(self.event_value)
        return [
            f"Received event {self.event_name} is {value} related with flow {self.flow.as_dict_text()}",
            f"fsm_policy:event_name= {self.event_name}",
            f"fsm_policy:event_value= {value}",
            f"fsm_policy:event_state= {self.state_text()}",
        ]


def _sort_key(flow: FlowSpec) -> tuple:
    return tuple(int(v) for _, v in flow.canonical())


class FsmPolicy:
    """One FSM instance per LPEC key, all mutations serialized by a lock."""

    def __init__(self, fsm_def: FsmDef, policy_var: str = "policy"):
        validate(fsm_def)
        if not isinstance(fsm_def.var(policy_var).vtype, FiniteSet):
            raise ValidationError(f"policy variable {policy_var!r} must have a finite-set type")
        self.fsm_def = fsm_def
        self.policy_var = policy_var
        self.instances: Dict[str, FsmInstance] = {}
        self._order = topo_order(fsm_def)
        self._lock = threading.RLock()

    def lpec_key(self, flow: FlowSpec) -> FlowSpec:
        for f in self.fsm_def.lpec_fields:
            if f not in flow:
                raise MissingLpecField(f)
        return flow.restrict(self.fsm_def.lpec_fields)

    def get_or_create_instance(self, flow: FlowSpec) -> FsmInstance:
        key = self.lpec_key(flow)
        with self._lock:
            inst = self.instances.get(key.key())
            if inst is None:
                inst = FsmInstance(key, self.fsm_def.initial_valuation())
                self.instances[key.key()] = inst
            return inst

    def observe_packet(self, p: Packet) -> Optional[FsmInstance]:
        """Create the instance for a packet's LPEC, if the packet binds its fields."""
        try:
            return self.get_or_create_instance(p.headers)
        except MissingLpecField:
            return None

    def _recompute(self, valuation: Dict[str, Any]) -> None:
        for name in self._order:
            valuation[name] = self.fsm_def.var(name).next_value(valuation)
        for name in self._order:
            if self.fsm_def.var(name).next_value(valuation) != valuation[name]:
                raise AssertionError(f"valuation not stable at {name!r}")

    def _report_order(self) -> List[str]:
        names = list(self.fsm_def.names)
        names.remove(self.policy_var)
        return [self.policy_var] + names

    def apply_event(self, ev: Event) -> StateReport:
        try:
            var = self.fsm_def.var(ev.name)
        except KeyError:
            raise UnknownEvent(ev.name) from None
        if not var.exogenous:
            raise UnknownEvent(ev.name)
        try:
            value = var.vtype.resolve(ev.value)
        except KeyError:
            raise TypeMismatch(ev.name, ev.value) from None
        with self._lock:
            inst = self.get_or_create_instance(ev.flow)
            inst.valuation[ev.name] = value
            self._recompute(inst.valuation)
            snapshot = tuple((k, inst.valuation[k]) for k in self._report_order())
        return StateReport(ev.name, value, ev.flow, snapshot)

    # JSON callback name used by event sources
    event_handler = apply_event

    def valuation(self, flow: FlowSpec) -> Dict[str, Any]:
        with self._lock:
            inst = self.instances.get(self.lpec_key(flow).key())
            return dict(inst.valuation) if inst else self.fsm_def.initial_valuation()

    def snapshot(self) -> Dict[str, Dict[str, Any]]:
        with self._lock:
            return {k: dict(i.valuation) for k, i in self.instances.items()}

    def derived_policy(self) -> Policy:
        with self._lock:
            ordered = sorted(self.instances.values(), key=lambda i: _sort_key(i.key))
            pol: Policy = identity
            for inst in reversed(ordered):
                pol = IfThenElse(inst.key, Dynamic(inst.valuation[self.policy_var]), pol)
            return pol


__all__ = [
    "BoolType", "FiniteSet", "EventOccurred", "IsTrue", "TestAndTrue", "Default",
    "EventValue", "Constant", "TransitionCase", "FsmVar", "FsmDef", "FsmInstance",
    "FsmPolicy", "StateReport", "ValidationError", "CyclicDependency", "InitNotInType",
    "MixedTransitionKinds", "DuplicateVar", "UnknownEvent", "TypeMismatch",
    "MissingLpecField", "validate", "topo_order", "occurred", "is_true",
    "test_and_true", "case", "format_fsm_value",
]
