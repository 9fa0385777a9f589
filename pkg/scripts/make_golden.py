#!/usr/bin/env python3
"""Regenerate the golden corpus (keys, ciphertexts, certificates, reports).

    python3 scripts/make_golden.py OUT_DIR [--seed HEX]

Every file is a pure function of the seed, so two runs must agree byte for byte.
"""

import argparse
import sys
from pathlib import Path

from pkepvd.cli import main as cli

REPORTS = [
    ("otu-identity-bitflip", ["otu", "--lambda", "8", "--lambda-f", "8", "--backend", "identity", "--adversary", "bitflip", "--trials", "200"]),
    ("otu-sha256-bitflip", ["otu", "--lambda", "8", "--lambda-f", "32", "--adversary", "bitflip", "--trials", "200"]),
    ("cd-honest", ["cd", "--lambda", "8", "--lambda-f", "32", "--trials", "200"]),
    ("everlasting", ["everlasting", "--lambda", "3", "--lambda-f", "32"]),
    ("mask-posterior", ["mask-posterior", "--lambda", "3", "--lambda-f", "16", "--trials", "100"]),
]


def generate(out: Path, seed: str) -> None:
    out.mkdir(parents=True, exist_ok=True)

    def run(*args):
        code = cli([str(a) for a in args])
        if code != 0:
            raise SystemExit(f"command failed ({code}): {' '.join(map(str, args))}")

    run("keygen", "--lambda", 8, "--lambda-f", 32, "--seed", seed, "--out", out / "key")
    run("encrypt", "--pk", out / "key.pk", "--message", "1011", "--seed", seed + "01", "--out", out / "msg")
    (out / "msg-copy.ct").write_bytes((out / "msg.ct").read_bytes())
    run("delete", "--ct", out / "msg-copy.ct", "--seed", seed + "02", "--out", out / "msg.cert")
    for name, args in REPORTS:
        run("experiment", *args, "--seed", seed, "--out", out / f"{name}.json")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", type=Path)
    ap.add_argument("--seed", default="90d")
    args = ap.parse_args()
    generate(args.out, args.seed)
    sys.exit(0)
