"""Composable packet-processing policies.

Policies are immutable ASTs evaluated on one packet at a time into a set of
output packets. ``a >> b`` is sequential composition, ``a + b`` parallel.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .packet import FlowSpec, Packet, format_value, matches, rewrite

INDENT = "    "


class MissingPortContext(ValueError):
    pass


class Policy:
    def __rshift__(self, other: "Policy") -> "Policy":
        return seq(self, other)

    def __add__(self, other: "Policy") -> "Policy":
        return par(self, other)

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True, eq=True, repr=False)
class Drop(Policy):
    def __repr__(self) -> str:
        return "drop"


@dataclass(frozen=True, eq=True, repr=False)
class Identity(Policy):
    def __repr__(self) -> str:
        return "identity"


@dataclass(frozen=True)
class Match(Policy):
    flow: FlowSpec


@dataclass(frozen=True)
class Modify(Policy):
    assignments: FlowSpec

    def __post_init__(self):
        if len(self.assignments) == 0:
            raise ValueError("modify needs at least one assignment")


@dataclass(frozen=True)
class Fwd(Policy):
    port: int

    def __post_init__(self):
        if not isinstance(self.port, int) or self.port < 1:
            raise ValueError(f"bad port {self.port!r}")


@dataclass(frozen=True, eq=True, repr=False)
class Flood(Policy):
    def __repr__(self) -> str:
        return "flood"


@dataclass(frozen=True)
class Sequential(Policy):
    policies: tuple

    def __post_init__(self):
        if len(self.policies) < 2:
            raise ValueError("sequential needs at least two members")


@dataclass(frozen=True)
class Parallel(Policy):
    policies: tuple

    def __post_init__(self):
        if len(self.policies) < 2:
            raise ValueError("parallel needs at least two members")


@dataclass(frozen=True)
class IfThenElse(Policy):
    guard: FlowSpec
    then: Policy
    else_: Policy


class Named(Policy):
    """A policy with a stable display name; equality is by name only."""

    __slots__ = ("name", "inner")

    def __init__(self, name: str, inner: Policy):
        self.name = name
        self.inner = inner

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Named) and other.name == self.name

    def __hash__(self) -> int:
        return hash(("named", self.name))

    def __repr__(self) -> str:
        return f"Named({self.name!r})"


@dataclass(frozen=True)
class Dynamic(Policy):
    """Marks a policy installed by a dynamic controller module.

    Evaluates as ``inner``; renders with a ``[DynamicPolicy]`` banner.
    """
    inner: Policy


drop = Named("drop", Drop())
identity = Named("identity", Identity())
flood = Flood()


def match(flow: Optional[FlowSpec] = None, **fields) -> Match:
    return Match(flow if flow is not None else FlowSpec(fields))


def modify(assignments: Optional[FlowSpec] = None, **fields) -> Modify:
    return Modify(assignments if assignments is not None else FlowSpec(fields))


def _flatten(kind: type, policies: Iterable[Policy]) -> tuple:
    out: list[Policy] = []
    for p in policies:
        if isinstance(p, kind):
            out.extend(p.policies)
        else:
            out.append(p)
    return tuple(out)


def seq(*policies: Policy) -> Policy:
    flat = _flatten(Sequential, policies)
    if len(flat) == 1:
        return flat[0]
    return Sequential(flat)


def par(*policies: Policy) -> Policy:
    flat = _flatten(Parallel, policies)
    if len(flat) == 1:
        return flat[0]
    return Parallel(flat)


def sequential(policies: Sequence[Policy]) -> Policy:
    return seq(*policies) if policies else identity


def parallel(policies: Sequence[Policy]) -> Policy:
    return par(*policies) if policies else drop


def evaluate(pol: Policy, p: Packet, ports: Optional[Iterable[int]] = None) -> frozenset:
    """Evaluate ``pol`` on ``p``; the empty set means the packet was dropped.

    ``ports`` is the port set of the packet's switch, needed only by Flood.
    """
    if isinstance(pol, Named):
        return evaluate(pol.inner, p, ports)
    if isinstance(pol, Dynamic):
        return evaluate(pol.inner, p, ports)
    if isinstance(pol, Drop):
        return frozenset()
    if isinstance(pol, Identity):
        return frozenset((p,))
    if isinstance(pol, Match):
        return frozenset((p,)) if matches(p, pol.flow) else frozenset()
    if isinstance(pol, Modify):
        return frozenset((rewrite(p, pol.assignments),))
    if isinstance(pol, Fwd):
        p.require_location()
        return frozenset((p.replace(outport=pol.port),))
    if isinstance(pol, Flood):
        p.require_location()
        if ports is None:
            raise MissingPortContext("flood needs the switch port set")
        inport = p["inport"]
        return frozenset(p.replace(outport=port) for port in ports if port != inport)
    if isinstance(pol, Sequential):
        current = frozenset((p,))
        for stage in pol.policies:
            current = frozenset().union(*(evaluate(stage, q, ports) for q in current))
            if not current:
                break
        return current
    if isinstance(pol, Parallel):
        return frozenset().union(*(evaluate(member, p, ports) for member in pol.policies))
    if isinstance(pol, IfThenElse):
        branch = pol.then if matches(p, pol.guard) else pol.else_
        return evaluate(branch, p, ports)
    raise TypeError(f"not a policy: {pol!r}")


def _pairs(flow: FlowSpec) -> str:
    return " ".join(f"('{k}', {format_value(v)})" for k, v in flow.items_in_order)


def _indent(text: str) -> str:
    return "\n".join(INDENT + line for line in text.split("\n"))


def _flood_table(ports: Sequence[int], switch: int) -> str:
    egress = ", ".join(f"{switch}[{p}]---" for p in ports)
    return "\n".join([
        "flood on:",
        "-----",
        "switch | switch edges | egress ports |",
        "-----",
        f"{switch:<6} | | {egress} |",
    ])


def render(pol: Policy, ports: Optional[Sequence[int]] = None, switch: int = 1) -> str:
    """Multi-line text form of a policy, in the controller-log style."""
    if isinstance(pol, Named):
        return pol.name
    if isinstance(pol, Dynamic):
        return "[DynamicPolicy]\n" + render(pol.inner, ports, switch)
    if isinstance(pol, Drop):
        return "drop"
    if isinstance(pol, Identity):
        return "identity"
    if isinstance(pol, Match):
        return f"match: {_pairs(pol.flow)}" if len(pol.flow) else "match: "
    if isinstance(pol, Modify):
        return f"modify: {_pairs(pol.assignments)}"
    if isinstance(pol, Fwd):
        return f"fwd {pol.port}"
    if isinstance(pol, Flood):
        return "flood" if ports is None else _flood_table(ports, switch)
    if isinstance(pol, Sequential):
        return "sequential:\n" + "\n".join(_indent(render(q, ports, switch)) for q in pol.policies)
    if isinstance(pol, Parallel):
        return "parallel:\n" + "\n".join(_indent(render(q, ports, switch)) for q in pol.policies)
    if isinstance(pol, IfThenElse):
        guard = f"match: {_pairs(pol.guard)}"
        return "\n".join([
            "if",
            _indent(guard),
            "then",
            _indent(render(pol.then, ports, switch)),
            "else",
            _indent(render(pol.else_, ports, switch)),
        ])
    raise TypeError(f"not a policy: {pol!r}")


def is_filter(pol: Policy) -> bool:
    """True when the policy can only pass or drop packets, never change them."""
    if isinstance(pol, (Named, Dynamic)):
        return is_filter(pol.inner)
    if isinstance(pol, (Drop, Identity, Match)):
        return True
    if isinstance(pol, (Sequential, Parallel)):
        return all(is_filter(q) for q in pol.policies)
    if isinstance(pol, IfThenElse):
        return is_filter(pol.then) and is_filter(pol.else_)
    return False
