"""Structural ablation table: agent calls per configuration.

Runs scripted n-step plans under the full pipeline, without the extractor
and without the planner, and tabulates the calls each agent received.
Scores are not meaningful with a scripted model; only the shape is.

    python scripts/ablation_structure.py [--k 5] [--max-steps 5] [--csv out.csv]
"""

from __future__ import annotations

import argparse
import csv
import sys

from agentrag.orchestrator import EngineConfig
from agentrag.testing import synthetic

CONFIGS = {
    "full": {},
    "no-extractor": {"extractor_enabled": False},
    "no-planner": {"planner_enabled": False},
}
COLUMNS = ["config", "n_steps", "planner", "step_definer", "search", "extractor", "qa", "final_answer"]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--max-steps", type=int, default=5)
    ap.add_argument("--docs", type=int, default=10)
    ap.add_argument("--csv")
    args = ap.parse_args()

    rows = []
    for n in range(1, args.max_steps + 1):
        syn = synthetic(n, n_docs=args.docs, seed=n)
        for name, overrides in CONFIGS.items():
            t = syn.engine(EngineConfig(k=args.k, **overrides)).execute(syn.question)
            rows.append([
                name, n, len(t.calls("planner")), len(t.calls("step_definer")), len(t.retrievals),
                len(t.calls("extractor")), len(t.calls("qa")), t.final_answer,
            ])

    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(COLUMNS)
    w.writerows(rows)
    if args.csv:
        out.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
