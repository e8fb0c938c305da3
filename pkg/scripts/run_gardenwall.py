#!/usr/bin/env python3
"""Reproduce the garden-wall evaluation end to end.

Prints the verification preamble, then replays the bundled session with
events delivered through the TCP gateway, and finally a short summary.
"""
import argparse
import sys

from fsmnet.controller import Controller
from fsmnet.gardenwall import DEFAULT_SPECS, gardenwall_def
from fsmnet.netsim import build_topology
from fsmnet.scenario import run_scenario


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--in-process", action="store_true", help="skip the TCP gateway")
    ap.add_argument("--quiet", action="store_true", help="only print the summary")
    args = ap.parse_args(argv)

    emit = (lambda _: None) if args.quiet else print
    ctl = Controller(gardenwall_def(), build_topology("single,3"), emit=emit)
    results, preamble = ctl.verify(DEFAULT_SPECS)
    for line in preamble:
        emit(line)
    emit("")
    result = run_scenario("gardenwall_session", over_wire=not args.in_process, emit=emit)

    pings = [line for line in result.transcript if "packets transmitted" in line]
    print("")
    print(f"specs verified: {sum(r.result.holds for r in results)}/{len(results)}")
    for line in pings:
        print(f"  {line.split(', time')[0]}")
    print(f"expectation failures: {len(result.failures)}")
    for f in result.failures:
        print(f"  {f}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
