"""Command-line entry points: ``run``, ``scenario``, ``verify`` and ``send``."""
from __future__ import annotations

import argparse
import functools
import signal
import sys
import threading
from importlib import resources
from typing import List, Optional, Sequence

from .controller import Controller
from .ctl import CtlSyntaxError, load_specs
from .fsm import ValidationError
from .gardenwall import APPS, DEFAULT_SPECS, GardenwallConfig
from .gateway import DEFAULT_ADDRESS, DEFAULT_PORT, send_event_cli
from .netsim import UnsupportedTopology, build_topology
from .scenario import ScenarioError, run_scenario
from .verifier import UnknownAtom

EXIT_INVALID = 2
EXIT_UNVERIFIED = 3

_print = functools.partial(print, flush=True)


def _specs(path: Optional[str]) -> List[str]:
    if path is None:
        return list(DEFAULT_SPECS)
    if path == "gardenwall":
        text = resources.files("fsmnet").joinpath("data", "gardenwall.ctl")
        with resources.as_file(text) as p:
            return load_specs(p)
    return load_specs(path)


def _controller(args) -> Controller:
    cfg = GardenwallConfig.from_file(args.config) if args.config else GardenwallConfig()
    return Controller(APPS[args.app](cfg), build_topology(args.topo), emit=_print)


def _verify_preamble(ctl: Controller, spec_path: Optional[str]):
    results, lines = ctl.verify(_specs(spec_path))
    for line in lines:
        _print(line)
    return results


def cmd_verify(args) -> int:
    try:
        ctl = _controller(args)
        results = _verify_preamble(ctl, args.specs)
    except (ValidationError, UnsupportedTopology, CtlSyntaxError, UnknownAtom, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return 0 if all(r.result.holds for r in results) else EXIT_UNVERIFIED


def run_controller(args, stop: Optional[threading.Event] = None) -> int:
    """Verify, then serve events until interrupted (or until ``stop`` is set)."""
    try:
        ctl = _controller(args)
        results = _verify_preamble(ctl, args.specs)
    except (ValidationError, UnsupportedTopology, CtlSyntaxError, UnknownAtom, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.require_verified and not all(r.result.holds for r in results):
        print("error: specification failed; not serving", file=sys.stderr)
        return EXIT_UNVERIFIED
    _print("")
    for line in ctl.topology.describe():
        _print(line)
    try:
        listener = ctl.serve(args.address, args.port)
    except OSError as exc:
        print(f"error: cannot listen on {args.address}:{args.port}: {exc}", file=sys.stderr)
        return 1
    _print(f"Listening for events on {args.address}:{listener.port}")
    stop = stop or threading.Event()
    if threading.current_thread() is threading.main_thread():
        signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        while not stop.wait(0.2):
            pass
    except KeyboardInterrupt:
        pass
    finally:
        ctl.close()
    return 0


def cmd_scenario(args) -> int:
    try:
        result = run_scenario(args.file, over_wire=args.over_wire, emit=_print)
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for failure in result.failures:
        print(f"expectation failed: {failure}", file=sys.stderr)
    return result.exit_code


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--app", default="gardenwall", choices=sorted(APPS))
    p.add_argument("--topo", default="single,3")
    p.add_argument("--specs", default=None, help="CTL spec file, one formula per line")
    p.add_argument("--config", default=None, help="JSON app config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsmnet", description="FSM network-security controller")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="verify the app, then serve events")
    _common(run)
    run.add_argument("--address", default=DEFAULT_ADDRESS)
    run.add_argument("--port", type=int, default=DEFAULT_PORT)
    run.add_argument("--require-verified", action="store_true")
    run.set_defaults(func=run_controller)

    ver = sub.add_parser("verify", help="print the verification preamble and exit")
    _common(ver)
    ver.set_defaults(func=cmd_verify)

    sc = sub.add_parser("scenario", help="replay a scenario script")
    sc.add_argument("file", help="scenario path, or the bundled name gardenwall_session")
    sc.add_argument("--over-wire", action="store_true", help="deliver events through the TCP gateway")
    sc.set_defaults(func=cmd_scenario)

    sub.add_parser("send", help="send one event (json_sender flags)", add_help=False)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "send":
        return send_event_cli(argv[1:])
    args = build_parser().parse_args(argv)
    return args.func(args)


def entry() -> None:
    sys.exit(main())
