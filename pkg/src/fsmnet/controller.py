"""Wires an FSM program, the verifier, the event listener and the fabric."""
from __future__ import annotations

from typing import Callable, Iterable, List, Optional

from .fsm import FsmDef, FsmPolicy, StateReport, validate
from .gateway import Event, EventListener, serve
from .netsim import Fabric, PingReport, Topology
from .policy import render
from .verifier import SpecResult, build_model, format_preamble, verify


class Controller:
    def __init__(self, fsm_def: FsmDef, topology: Topology, policy_var: str = "policy",
                 emit: Callable[[str], None] = print):
        validate(fsm_def)
        self.fsm_def = fsm_def
        self.fsm = FsmPolicy(fsm_def, policy_var)
        self.topology = topology
        self.fabric = Fabric(topology, self.fsm.derived_policy, observe=self.fsm.observe_packet)
        self.emit = emit
        self.listener: Optional[EventListener] = None

    def verify(self, specs: Iterable[str]) -> tuple[List[SpecResult], List[str]]:
        model = build_model(self.fsm_def)
        results = verify(model, specs)
        return results, format_preamble(model, results)

    def handle_event(self, ev: Event) -> StateReport:
        report = self.fsm.apply_event(ev)
        for line in report.lines():
            self.emit(line)
        self.emit("fsm_policy:self.policy = " + render(self.fsm.derived_policy()))
        return report

    def ping(self, src: str, dst: str, count: int) -> PingReport:
        report = self.fabric.ping(src, dst, count)
        for line in report.lines:
            self.emit(line)
        return report

    def serve(self, address: str = "127.0.0.1", port: int = 50001) -> EventListener:
        self.listener = serve(address, port, self.handle_event, emit=self.emit)
        return self.listener

    def close(self) -> None:
        if self.listener is not None:
            self.listener.stop()
            self.listener = None
