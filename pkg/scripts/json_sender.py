#!/usr/bin/env python3
"""Send one event to a running controller.

    python3 scripts/json_sender.py -n infected -l True --flow "{srcip=10.0.0.1}" -a 127.0.0.1 -p 50001
"""
import sys

from fsmnet.gateway import send_event_cli

if __name__ == "__main__":
    sys.exit(send_event_cli(sys.argv[1:]))
