#!/usr/bin/env python3
"""Exact everlasting-oracle table over a lambda range and the adversary family.

    python3 scripts/run_everlasting.py --lambdas 2 3 4 [--real-base] [--seed HEX]
"""

import argparse

from pkepvd.adversaries import default_family
from pkepvd.experiments import ORACLE_MAX_LAMBDA, everlasting_oracle
from pkepvd.rng import Rng


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--lambda-f", type=int, default=128)
    ap.add_argument("--real-base", action="store_true", help="use the ske base instead of the ideal double")
    ap.add_argument("--seed", default="e7")
    args = ap.parse_args()
    if any(not 1 <= lam <= ORACLE_MAX_LAMBDA for lam in args.lambdas):
        ap.error(f"lambdas must lie in 1..{ORACLE_MAX_LAMBDA}")

    print(f"{'lambda':>6} {'adversary':<12} {'accept':>10} {'forge':>6} {'TD':>10} {'TD|acc':>10} {'TD theta!=0':>12} {'2^-lambda':>10}")
    rng = Rng(args.seed)
    for lam in args.lambdas:
        reports = everlasting_oracle(
            lam, default_family(lam), rng.spawn(lam), idealize_base=not args.real_base, lambda_f=args.lambda_f
        )
        for r in reports:
            print(
                f"{lam:>6} {r.adversary:<12} {r.acceptance:>10.6f} {r.forge_rate:>6.3f} {r.trace_distance:>10.6f}"
                f" {r.trace_distance_conditioned:>10.6f} {r.trace_distance_nondegenerate:>12.3g} {2.0**-lam:>10.6f}"
            )


if __name__ == "__main__":
    main()
