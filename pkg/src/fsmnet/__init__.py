"""Event-driven FSM network-security policies with CTL verification and a simulated fabric."""
from .fsm import FsmDef, FsmPolicy, FsmVar
from .gardenwall import GardenwallConfig, gardenwall_def, gardenwall_policy
from .gateway import Event
from .packet import FlowSpec, Packet, matches, parse_flow_spec, render_flow_spec, rewrite
from .policy import evaluate, par, render, seq

__version__ = "0.1.0"

__all__ = [
    "Event", "FlowSpec", "FsmDef", "FsmPolicy", "FsmVar", "GardenwallConfig", "Packet",
    "evaluate", "gardenwall_def", "gardenwall_policy", "matches", "par", "parse_flow_spec",
    "render", "render_flow_spec", "rewrite", "seq",
]
