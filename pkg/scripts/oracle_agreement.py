#!/usr/bin/env python3
"""Cross-check the fixpoint CTL checker against the unrolling oracle.

Run from the repository root; the oracle lives with the tests.
"""
import argparse
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from oracles import UnrollingOracle, random_formula, random_model  # noqa: E402

from fsmnet.verifier import reachable, satisfying_states  # noqa: E402


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--models", type=int, default=1000)
    ap.add_argument("--formulas", type=int, default=4, help="formulas per model")
    ap.add_argument("--max-states", type=int, default=64)
    ap.add_argument("--depth", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = random.Random(args.seed)
    cases = bad = 0
    t0 = time.perf_counter()
    for _ in range(args.models):
        m = random_model(rng, max_states=args.max_states)
        oracle = UnrollingOracle(m)
        for _ in range(args.formulas):
            f = random_formula(rng, m, args.depth)
            got = satisfying_states(m, f)
            for s in reachable(m):
                cases += 1
                if (s in got) != oracle.holds(s, f):
                    bad += 1
                    print(f"disagreement: state {s}: {f}")
    dt = time.perf_counter() - t0
    print(f"{args.models} models, {cases} cases, {bad} disagreements, {dt:.1f}s")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
