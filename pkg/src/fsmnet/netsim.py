"""Deterministic single-switch fabric: topology, MAC learning, ping.

Every injected packet runs through two stages: the controller's current
policy snapshot, then a MAC-learning forwarder. Echo requests that reach a
host whose IP equals the packet's destination IP are answered; the replies
travel back through the same pipeline.
"""
from __future__ import annotations

import ipaddress
import re
import statistics
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from .packet import MAC, FlowSpec, MissingLocation, Packet
from .policy import Dynamic, Fwd, IfThenElse, Policy, evaluate, flood

ETH_IPV4 = 0x0800
PROTO_ICMP = 1
TTL = 64
HOP_MS = 0.05
# host->switch->host out and back
HOPS_PER_ROUND_TRIP = 4


class UnsupportedTopology(ValueError):
    pass


class UnknownHost(KeyError):
    pass


class Undeliverable(ValueError):
    pass


@dataclass(frozen=True)
class Host:
    name: str
    mac: MAC
    ip: ipaddress.IPv4Address
    switch: int
    port: int


@dataclass(frozen=True)
class Topology:
    switches: Dict[int, Tuple[int, ...]]
    hosts: Dict[str, Host]
    links: Tuple[Tuple[str, int, int], ...]

    def __post_init__(self):
        macs = [h.mac for h in self.hosts.values()]
        ips = [h.ip for h in self.hosts.values()]
        if len(set(macs)) != len(macs) or len(set(ips)) != len(ips):
            raise ValueError("host macs and ips must be unique")
        for h in self.hosts.values():
            if h.port not in self.switches.get(h.switch, ()):
                raise ValueError(f"{h.name}: port {h.port} missing on switch {h.switch}")

    def host(self, name: str) -> Host:
        try:
            return self.hosts[name]
        except KeyError:
            raise UnknownHost(name) from None

    def host_at(self, switch: int, port: int) -> Optional[Host]:
        for h in self.hosts.values():
            if h.switch == switch and h.port == port:
                return h
        return None

    def host_by_ip(self, ip) -> Optional[Host]:
        ip = ipaddress.IPv4Address(str(ip))
        for h in self.hosts.values():
            if h.ip == ip:
                return h
        return None

    def describe(self) -> List[str]:
        names = " ".join(self.hosts)
        return [
            "*** Adding hosts:", names,
            "*** Adding switches:", " ".join(f"s{s}" for s in self.switches),
            "*** Adding links:", " ".join(f"({h}, s{s})" for h, s, _ in self.links),
        ]


def build_topology(spec: str) -> Topology:
    """``single,N``: one switch with hosts h1..hN on ports 1..N, static ARP."""
    m = re.fullmatch(r"\s*single\s*,\s*(\d+)\s*", spec)
    if m is None:
        raise UnsupportedTopology(spec)
    n = int(m.group(1))
    if not 2 <= n <= 254:
        raise UnsupportedTopology(spec)
    hosts = {}
    for i in range(1, n + 1):
        hosts[f"h{i}"] = Host(f"h{i}", MAC(i), ipaddress.IPv4Address(f"10.0.0.{i}"), 1, i)
    links = tuple((name, 1, h.port) for name, h in hosts.items())
    return Topology({1: tuple(range(1, n + 1))}, hosts, links)


@dataclass(frozen=True)
class MacLearnerState:
    tables: Tuple[Tuple[int, Tuple[Tuple[MAC, int], ...]], ...] = ()

    def table(self, switch: int) -> Dict[MAC, int]:
        for sw, entries in self.tables:
            if sw == switch:
                return dict(entries)
        return {}

    def learn(self, switch: int, mac: MAC, port: int) -> "MacLearnerState":
        tables = dict(self.tables)
        entries = dict(tables.get(switch, ()))
        entries[mac] = port
        tables[switch] = tuple(entries.items())
        return MacLearnerState(tuple(sorted(tables.items())))

    def as_policy(self, switch: int) -> Policy:
        """The learner's forwarding behavior on one switch as a policy value."""
        pol: Policy = flood
        for mac, port in reversed(list(self.table(switch).items())):
            pol = IfThenElse(FlowSpec([("switch", switch), ("dstmac", mac)]), Dynamic(Fwd(port)), pol)
        return pol


def mac_learner_step(state: MacLearnerState, p: Packet) -> Tuple[MacLearnerState, Policy]:
    for f in ("switch", "inport", "srcmac", "dstmac"):
        if f not in p:
            raise MissingLocation(f"mac learner needs {f}")
    switch = p["switch"]
    state = state.learn(switch, p["srcmac"], p["inport"])
    port = state.table(switch).get(p["dstmac"])
    return state, (Fwd(port) if port is not None else flood)


def transport(t: Topology, pol: Policy, p: Packet) -> List[Tuple[str, Packet]]:
    """Evaluate ``pol`` at the packet's switch and hand each output to its host."""
    p.require_location()
    ports = t.switches[p["switch"]]
    deliveries = []
    for q in sorted(evaluate(pol, p, ports), key=lambda q: (q.outport is None, q.outport or 0, repr(q))):
        host = t.host_at(p["switch"], q.outport) if q.outport is not None else None
        if host is None:
            raise Undeliverable(f"no host behind outport {q.outport}")
        deliveries.append((host.name, q))
    return deliveries


@dataclass
class PingReport:
    transmitted: int
    received: int
    replier_ips: List[str]
    lines: List[str] = field(default_factory=list)

    @property
    def loss_pct(self) -> float:
        return 100.0 * (self.transmitted - self.received) / self.transmitted


def _pct(x: float) -> str:
    return f"{x:g}"


class Fabric:
    """Simulated switch fabric driven by a controller policy source.

    ``policy_source`` is called once per injected packet and returns the
    policy snapshot for that packet. ``observe`` (optional) sees every
    injected packet before the policy is applied.
    """

    def __init__(self, topology: Topology, policy_source: Callable[[], Policy],
                 observe: Optional[Callable[[Packet], object]] = None):
        self.topology = topology
        self.policy_source = policy_source
        self.observe = observe
        self.learner = MacLearnerState()
        self.decisions: List[Tuple[Packet, Policy]] = []
        self._ident = 0

    def inject(self, p: Packet) -> List[Tuple[str, Packet]]:
        snapshot = self.policy_source()
        if self.observe is not None:
            self.observe(p)
        ports = self.topology.switches[p["switch"]]
        deliveries = []
        for q in sorted(evaluate(snapshot, p, ports), key=repr):
            self.learner, fwd = mac_learner_step(self.learner, q)
            self.decisions.append((q, fwd))
            deliveries.extend(transport(self.topology, fwd, q))
        return deliveries

    def _reply_to(self, host: Host, q: Packet) -> Optional[Packet]:
        if not q.meta or q.meta[0] != "echo-request" or q.get("dstip") != host.ip:
            return None
        return Packet(
            {"switch": host.switch, "inport": host.port, "srcmac": host.mac,
             "dstmac": q["srcmac"], "srcip": host.ip, "dstip": q["srcip"],
             "ethtype": ETH_IPV4, "protocol": PROTO_ICMP},
            meta=("echo-reply",) + tuple(q.meta[1:]),
        )

    def ping(self, src: str, dst: str, count: int = 1) -> PingReport:
        if src == dst:
            raise ValueError("ping needs two distinct hosts")
        a, b = self.topology.host(src), self.topology.host(dst)
        self._ident += 1
        ident = self._ident
        lines = [f"PING {b.ip} ({b.ip}) 56(84) bytes of data."]
        repliers: List[str] = []
        rtts: List[float] = []
        for seq in range(1, count + 1):
            request = Packet(
                {"switch": a.switch, "inport": a.port, "srcmac": a.mac, "dstmac": b.mac,
                 "srcip": a.ip, "dstip": b.ip, "ethtype": ETH_IPV4, "protocol": PROTO_ICMP},
                meta=("echo-request", ident, seq),
            )
            answered: Optional[str] = None
            for name, q in self.inject(request):
                reply = self._reply_to(self.topology.host(name), q)
                if reply is None:
                    continue
                for back_name, r in self.inject(reply):
                    if back_name == src and r.meta == ("echo-reply", ident, seq) and answered is None:
                        answered = str(r["srcip"])
            if answered is not None:
                rtt = HOPS_PER_ROUND_TRIP * HOP_MS
                rtts.append(rtt)
                repliers.append(answered)
                lines.append(f"64 bytes from {answered} icmp_req={seq} ttl={TTL} time={rtt:.3f} ms")
        received = len(repliers)
        loss = 100.0 * (count - received) / count
        lines.append("")
        lines.append(f"--- {b.ip} ping statistics ---")
        lines.append(f"{count} packets transmitted, {received} received, {_pct(loss)}% packet loss, "
                     f"time {max(count - 1, 0) * 1000}ms")
        if rtts:
            mdev = statistics.pstdev(rtts)
            lines.append(f"rtt min/avg/max/mdev = {min(rtts):.3f}/{statistics.mean(rtts):.3f}/"
                         f"{max(rtts):.3f}/{mdev:.3f} ms")
        return PingReport(count, received, repliers, lines)


__all__ = [
    "Fabric", "Host", "MacLearnerState", "PingReport", "Topology", "UnknownHost",
    "UnsupportedTopology", "build_topology", "mac_learner_step", "transport",
]
