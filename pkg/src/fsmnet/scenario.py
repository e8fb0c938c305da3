"""Line-oriented scenario scripts replayed against an in-process controller.

    # comment
    topo single,3
    ping h1 h2 2
    expect loss 0
    event infected true srcip=10.0.0.1
    expect state srcip=10.0.0.1 policy=drop infected=true
    expect repliers 10.0.0.3 10.0.0.3

``expect`` kinds: ``loss <pct>``, ``received <n>``, ``transmitted <n>``,
``repliers <ip>...`` (checked against the last ping) and ``state <flow
fields> <var=value>...`` (checked against the FSM instance of that flow).
"""
from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, List, Optional, Tuple, Union

from .controller import Controller
from .fsm import BoolType, FiniteSet, format_fsm_value
from .gardenwall import APPS, GardenwallConfig
from .gateway import Event, parse_value, send_event
from .netsim import PingReport, build_topology
from .packet import FIELD_INDEX, FlowSpec


class ScenarioError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class EventStep:
    line: int
    text: str
    name: str
    value: Any
    flow: FlowSpec


@dataclass(frozen=True)
class PingStep:
    line: int
    text: str
    src: str
    dst: str
    count: int


@dataclass(frozen=True)
class ExpectStep:
    line: int
    text: str
    kind: str
    args: Tuple[str, ...]


Step = Union[EventStep, PingStep, ExpectStep]


@dataclass
class Scenario:
    steps: List[Step] = field(default_factory=list)
    topo: str = "single,3"
    app: str = "gardenwall"
    config: Optional[str] = None


def _split_pairs(tokens, line: int) -> List[Tuple[str, str]]:
    pairs = []
    for tok in tokens:
        if "=" not in tok:
            raise ScenarioError(line, f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        pairs.append((k.strip(), v.strip()))
    return pairs


def parse_scenario(text: str) -> Scenario:
    sc = Scenario()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            words = shlex.split(line)
        except ValueError as exc:
            raise ScenarioError(lineno, str(exc)) from None
        head, rest = words[0], words[1:]
        try:
            if head == "topo" and len(rest) == 1:
                sc.topo = rest[0]
            elif head == "app" and len(rest) == 1:
                sc.app = rest[0]
            elif head == "config" and len(rest) == 1:
                sc.config = rest[0]
            elif head == "event" and len(rest) >= 3:
                flow = FlowSpec(_split_pairs(rest[2:], lineno))
                sc.steps.append(EventStep(lineno, line, rest[0], parse_value(rest[1]), flow))
            elif head == "ping" and len(rest) in (2, 3):
                count = int(rest[2]) if len(rest) == 3 else 1
                if count < 1:
                    raise ScenarioError(lineno, "ping count must be positive")
                sc.steps.append(PingStep(lineno, line, rest[0], rest[1], count))
            elif head == "expect" and rest and rest[0] in ("loss", "received", "transmitted", "repliers", "state"):
                sc.steps.append(ExpectStep(lineno, line, rest[0], tuple(rest[1:])))
            else:
                raise ScenarioError(lineno, f"cannot parse {line!r}")
        except ScenarioError:
            raise
        except ValueError as exc:
            raise ScenarioError(lineno, str(exc)) from None
    return sc


BUNDLED = ("gardenwall_session",)


def load_scenario(path: Union[str, Path]) -> Scenario:
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        text = resources.files("fsmnet").joinpath("data", f"{path}.scn").read_text()
    else:
        text = p.read_text()
    return parse_scenario(text)


@dataclass
class ScenarioResult:
    transcript: List[str]
    failures: List[str]

    @property
    def exit_code(self) -> int:
        return 0 if not self.failures else 1


def _resolve_expected(var: str, vtype, token: str) -> Any:
    if isinstance(vtype, BoolType):
        low = token.lower()
        if low in ("true", "false"):
            return low == "true"
        raise ValueError(f"not a boolean: {token!r}")
    assert isinstance(vtype, FiniteSet)
    # positional alias as used in CTL specs: policy_1, policy_2, ...
    prefix = f"{var}_"
    if token.startswith(prefix) and token[len(prefix):].isdigit():
        k = int(token[len(prefix):])
        if 1 <= k <= len(vtype.members):
            return vtype.members[k - 1]
    return vtype.resolve(token)


def _check_expect(step: ExpectStep, ctl: Controller, last: Optional[PingReport]) -> Optional[str]:
    """Return a failure description, or None when the expectation holds."""
    if step.kind == "state":
        pairs = _split_pairs(step.args, step.line)
        flow = FlowSpec([(k, v) for k, v in pairs if k in FIELD_INDEX])
        expected = [(k, v) for k, v in pairs if k not in FIELD_INDEX]
        actual = ctl.fsm.valuation(flow)
        for var, token in expected:
            if var not in actual:
                return f"unknown variable {var!r}"
            vtype = ctl.fsm_def.var(var).vtype
            try:
                want = _resolve_expected(var, vtype, token)
            except (KeyError, ValueError):
                return f"{var}={token!r} is not a value of {var}"
            if actual[var] != want:
                return f"{var} is {format_fsm_value(actual[var])}, expected {format_fsm_value(want)}"
        return None
    if last is None:
        return "no ping has run yet"
    if step.kind == "loss":
        want = float(step.args[0].rstrip("%"))
        return None if abs(last.loss_pct - want) < 1e-9 else f"loss is {last.loss_pct:g}%, expected {want:g}%"
    if step.kind in ("received", "transmitted"):
        got = getattr(last, step.kind)
        want = int(step.args[0])
        return None if got == want else f"{step.kind} is {got}, expected {want}"
    if step.kind == "repliers":
        want = list(step.args)
        return None if last.replier_ips == want else f"repliers are {last.replier_ips}, expected {want}"
    return f"unknown expectation {step.kind!r}"


def run_scenario(sc: Union[Scenario, str, Path], over_wire: bool = False,
                 emit: Optional[Callable[[str], None]] = None) -> ScenarioResult:
    if not isinstance(sc, Scenario):
        sc = load_scenario(sc)
    transcript: List[str] = []

    def out(line: str) -> None:
        transcript.append(line)
        if emit is not None:
            emit(line)

    if sc.app not in APPS:
        raise ScenarioError(0, f"unknown app {sc.app!r}")
    cfg = GardenwallConfig.from_file(sc.config) if sc.config else GardenwallConfig()
    topo = build_topology(sc.topo)
    for step in sc.steps:
        if isinstance(step, PingStep):
            for h in (step.src, step.dst):
                if h not in topo.hosts:
                    raise ScenarioError(step.line, f"unknown host {h!r}")
    ctl = Controller(APPS[sc.app](cfg), topo, emit=out)
    failures: List[str] = []
    last: Optional[PingReport] = None
    if over_wire:
        ctl.serve("127.0.0.1", 0)
    try:
        for index, step in enumerate(sc.steps, start=1):
            if isinstance(step, EventStep):
                out(f">>> {step.text}")
                ev = Event(step.name, step.value, step.flow)
                if over_wire:
                    reply = send_event(ev, "127.0.0.1", ctl.listener.port)
                    if reply != "Ok":
                        failures.append(f"step {index} (line {step.line}): event rejected: {reply}")
                        out(reply)
                else:
                    try:
                        ctl.handle_event(ev)
                    except ValueError as exc:
                        failures.append(f"step {index} (line {step.line}): event rejected: {exc}")
                        out(f"Error: {type(exc).__name__}: {exc}")
            elif isinstance(step, PingStep):
                out(f"mininet> {step.src} ping -c {step.count} {step.dst}")
                last = ctl.ping(step.src, step.dst, step.count)
            else:
                problem = _check_expect(step, ctl, last)
                if problem is None:
                    out(f">>> {step.text}: ok")
                else:
                    msg = f"step {index} (line {step.line}): {step.text}: {problem}"
                    failures.append(msg)
                    out(f">>> {step.text}: FAILED ({problem})")
    finally:
        ctl.close()
    return ScenarioResult(transcript, failures)
