"""Markov check on sampled configurations for every scheme.

    python scripts/monte_carlo.py --model standard --c 4.5 --n 8 12 16 --trials 2000
"""

import argparse

from satbound.distributions import build_distribution
from satbound.schemes import Scheme
from satbound.verifier import monte_carlo_table


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", default="standard")
    ap.add_argument("--c", type=float, default=4.5)
    ap.add_argument("--n", type=int, nargs="+", default=[8, 12])
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--raw", action="store_true", help="keep clauses with repeated variables")
    args = ap.parse_args()
    spec = build_distribution(args.model, args.c)
    schemes = [Scheme.all_solutions(), Scheme.nps(), Scheme.nps_imbalance(), Scheme.alpha(2.0)]
    print("n,scheme,p_sat_hat,ex_hat,stderr_p,stderr_x,markov_margin")
    for n in args.n:
        table = monte_carlo_table(spec, schemes, n, args.trials, args.seed, legal=not args.raw)
        for s, r in table.items():
            print(f"{n},{s},{r.p_sat_hat:.4f},{r.ex_hat:.4f},{r.stderr[0]:.4f},{r.stderr[1]:.4f},{r.markov_margin:.4f}")


if __name__ == "__main__":
    main()
