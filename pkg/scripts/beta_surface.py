"""Maximum rate over the (beta1, beta2) grid at each model's bound density.

Writes plot-ready ``beta1,beta2,lnF`` grids (blank lnF marks proportions no
formula can realise).

    python scripts/beta_surface.py [--step 0.01] [--outdir results]
"""

import argparse
import time
from pathlib import Path

from satbound.cli import expected_values
from satbound.distributions import build_distribution
from satbound.schemes import Scheme
from satbound.solver import beta_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    ref = expected_values()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for model, point in ref["stationary"]["values"].items():
        c = point["c"]
        t0 = time.time()
        sw = beta_sweep(build_distribution(model, c), Scheme.alpha(ref["alpha"][model]), c, args.step)
        path = outdir / f"beta_{model}.csv"
        path.write_text("beta1,beta2,lnF\n" + "".join(
            f"{b1!r},{b2!r},{'' if v is None else repr(v)}\n" for b1, b2, v in sw.cells))
        print(f"{model}: interior lnF {sw.reference.lnF:.2e}, grid max {sw.max_lnF:.2e} at {sw.argmax}, "
              f"{len(sw.solved)} cells, {sw.missing} unsolvable, {time.time() - t0:.0f}s")


if __name__ == "__main__":
    main()
