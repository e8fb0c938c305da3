"""The garden-wall IDS/IPS program.

Infected hosts are dropped, infected but exempt hosts are redirected to the
garden-wall host, everything else passes.
"""
from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Union

from .fsm import (BoolType, Default, EventValue, FiniteSet, FsmDef, FsmPolicy, FsmVar,
                  case, is_true, occurred, test_and_true)
from .packet import MAC, FlowSpec
from .policy import Modify, Named, drop, identity, render

DEFAULT_SPECS = (
    "AG ((infected & !exempt) -> AX policy = policy_1)",
    "AG (!infected -> AX policy = policy_2)",
    "AG ((infected & exempt) -> AX policy = policy_3)",
    "A [ policy = policy_2 U infected ]",
)


@dataclass(frozen=True)
class GardenwallConfig:
    # client_ips documents the expected client range; the rewrite does not filter on it
    client_ips: List[str] = field(default_factory=lambda: ["10.0.0.1", "10.0.0.2"])
    gardenwall_ip: str = "10.0.0.3"
    gardenwall_mac: str = "00:00:00:00:00:03"

    def __post_init__(self):
        ips = [str(ipaddress.IPv4Address(ip)) for ip in self.client_ips]
        gw = str(ipaddress.IPv4Address(self.gardenwall_ip))
        MAC(self.gardenwall_mac)
        if gw in ips:
            raise ValueError(f"garden-wall ip {gw} is also a client ip")

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "GardenwallConfig":
        data = json.loads(Path(path).read_text())
        unknown = set(data) - {"client_ips", "gardenwall_ip", "gardenwall_mac"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def redirect_to_gardenwall(cfg: GardenwallConfig) -> Named:
    rewrite = Modify(FlowSpec([("dstip", cfg.gardenwall_ip), ("dstmac", cfg.gardenwall_mac)]))
    return Named(render(rewrite), rewrite)


def gardenwall_def(cfg: GardenwallConfig | None = None) -> FsmDef:
    cfg = cfg or GardenwallConfig()
    redirect = redirect_to_gardenwall(cfg)
    event_driven = (case(occurred(), EventValue()),)
    return FsmDef(
        variables=(
            FsmVar("infected", BoolType(), False, event_driven),
            FsmVar("exempt", BoolType(), False, event_driven),
            FsmVar(
                "policy",
                FiniteSet((drop, identity, redirect)),
                identity,
                (
                    case(test_and_true("exempt", "infected"), redirect),
                    case(is_true("infected"), drop),
                    case(Default(), identity),
                ),
            ),
        ),
        lpec_fields=("srcip",),
    )


def gardenwall_policy(cfg: GardenwallConfig | None = None) -> FsmPolicy:
    return FsmPolicy(gardenwall_def(cfg), policy_var="policy")


APPS = {"gardenwall": gardenwall_def}
