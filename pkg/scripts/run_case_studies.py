"""Run the three golden cases end to end and print each step.

    python scripts/run_case_studies.py [--out DIR]

With --out, one transcript per case is written there.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from agentrag.cli import print_run
from agentrag.testing import CASES, case_engine, load_case


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    failures = 0
    for name in CASES:
        case = load_case(name)
        t = case_engine(name).execute(case["question"])
        print(f"== {name} ==")
        print_run(t)
        ok = t.final_answer == case["final_answer"]
        failures += not ok
        print(f"expected: {case['final_answer']}  [{'ok' if ok else 'MISMATCH'}]\n")
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            t.write(args.out / f"{name}.json")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
