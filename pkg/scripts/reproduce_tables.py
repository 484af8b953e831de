"""Recompute every reference value and write a pass/fail report.

    python scripts/reproduce_tables.py [--M 21] [--step 0.05] [--out results/reproduce.json]
"""

import argparse
import sys
from pathlib import Path

from satbound.cli import dump_json, reproduce


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--M", type=int, default=21)
    ap.add_argument("--step", type=float, default=0.05)
    ap.add_argument("--out", default="results/reproduce.json")
    args = ap.parse_args()
    report = reproduce(args.M, args.step)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dump_json({"config": vars(args), **report}))
    for cell in report["cells"]:
        if cell["status"] != "pass":
            print(f"{cell['group']:12s} {cell['cell']:40s} {cell['status']}: {cell['computed']} vs {cell['expected']}")
    print(f"{report['passed']}/{report['total']} cells pass -> {out}")
    return 0 if report["passed"] == report["total"] else 1


if __name__ == "__main__":
    sys.exit(main())
