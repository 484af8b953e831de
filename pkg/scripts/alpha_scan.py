"""Bound as a function of the alpha coefficient, one CSV per model.

    python scripts/alpha_scan.py [--alphas 1.0 1.25 1.5 1.75 2.0 2.25 2.5] [--outdir results]
"""

import argparse
from pathlib import Path

from satbound.distributions import ModelId
from satbound.solver import alpha_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alphas", type=float, nargs="+", default=[1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5])
    ap.add_argument("--M", type=int, default=21)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for model in ModelId:
        rows = alpha_sweep(model, args.alphas, args.M)
        path = outdir / f"alpha_{model}.csv"
        path.write_text("alpha,bound\n" + "".join(f"{a!r},{b!r}\n" for a, b in rows))
        best = min(rows, key=lambda r: r[1])
        print(f"{model}: best alpha {best[0]} -> {best[1]:.4f}  ({path})")


if __name__ == "__main__":
    main()
