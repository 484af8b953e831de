"""How the linear-programming range of beta1 settles as the LP truncation grows.

    python scripts/lp_truncation.py --model standard --M-lp 10 12 15
"""

import argparse
import time

from satbound.cli import expected_values
from satbound.distributions import build_distribution
from satbound.errors import TruncationTooCoarse
from satbound.lp import beta1_bounds
from satbound.schemes import Scheme


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", default="standard")
    ap.add_argument("--M-lp", dest="M_lp", type=int, nargs="+", default=[8, 10, 12, 15])
    args = ap.parse_args()
    ref = expected_values()
    c = ref["stationary"]["values"][args.model]["c"]
    spec = build_distribution(args.model, c)
    scheme = Scheme.alpha(ref["alpha"][args.model])
    for M_lp in args.M_lp:
        t0 = time.time()
        try:
            lo, hi = beta1_bounds(spec, scheme, M_lp=M_lp)
            print(f"M_lp={M_lp:2d}: ({lo:.5f}, {hi:.5f})  {time.time() - t0:.1f}s")
        except TruncationTooCoarse as exc:
            print(f"M_lp={M_lp:2d}: {exc}")


if __name__ == "__main__":
    main()
