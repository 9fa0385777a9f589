#!/usr/bin/env python3
"""Sampled OTU and certified-deletion games for every shipped adversary.

    python3 scripts/run_games.py --lambda 8 --trials 2000 [--backend identity --lambda-f 8]
"""

import argparse

from pkepvd.adversaries import ADVERSARIES, make_adversary
from pkepvd.experiments import cd_report, otu_report
from pkepvd.pvd import PvdParams
from pkepvd.rng import Rng
from pkepvd.signature import BACKENDS


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambda", dest="lam", type=int, default=8)
    ap.add_argument("--lambda-f", type=int, default=128)
    ap.add_argument("--backend", choices=sorted(BACKENDS), default="sha256")
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", default="9a")
    args = ap.parse_args()

    params = PvdParams.create(args.lam, args.lambda_f, args.backend)
    rng = Rng(args.seed)
    print(f"{'adversary':<12} {'otu win':>8} {'cd accept':>10} {'cd forge':>9}")
    for i, name in enumerate(ADVERSARIES):
        if name == "coherent" and params.sig.backend.solve(0) is None:
            continue
        if name == "partial2" and args.lam < 2:
            continue
        adv = make_adversary(name)
        otu = otu_report(params.sig, adv, args.trials, rng.spawn(2 * i))
        cd = cd_report(params, adv, args.trials, rng.spawn(2 * i + 1))
        print(f"{adv.name:<12} {otu['win_rate']:>8.4f} {cd['acceptance_rate']:>10.4f} {cd['forge_rate']:>9.4f}")


if __name__ == "__main__":
    main()
