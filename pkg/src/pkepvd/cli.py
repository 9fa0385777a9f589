"""Command-line front end.

Exit codes: 0 success (verify: accepted), 1 verification rejected or golden
mismatch, 2 usage or invalid configuration, 3 malformed/consumed/undecryptable
input, 4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import struct
import sys
import tempfile
from pathlib import Path

from . import qsim
from .adversaries import ADVERSARIES, default_family, make_adversary
from .base import BASE_SCHEMES
from .errors import BaseDecryptionError, CapExceeded, CiphertextConsumed, FormatError, MalformedCiphertext
from .experiments import (
    ORACLE_MAX_LAMBDA,
    cd_report,
    everlasting_oracle,
    mask_posterior,
    otu_report,
    run_cd_game,
)
from .pvd import DeletionCertificate, PkePvd, PvdParams, QCiphertext, pvd_del, verify_certificate
from .qsim import Bits
from .rng import Rng
from .signature import BACKENDS, SigParams, VerificationKey

EXIT_OK, EXIT_REJECT, EXIT_USAGE, EXIT_FORMAT, EXIT_RESOURCE = 0, 1, 2, 3, 4

BUNDLE_MAGIC = b"PVDS"
EXPERIMENTS = ("otu", "cd", "everlasting", "mask-posterior")
DEFAULT_TRIALS = {"otu": 1000, "cd": 1000, "everlasting": 1, "mask-posterior": 200}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------


def write_atomic(path: Path, data: bytes, mode: int = 0o644) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, mode)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e.strerror}") from None


def key_file(kind: str, params: PvdParams, key: bytes) -> bytes:
    doc = {"kind": kind, "params": params.to_dict(), "key": key.hex()}
    return (json.dumps(doc, sort_keys=True) + "\n").encode()


def load_key(path, kind: str) -> tuple[PvdParams, bytes]:
    try:
        doc = json.loads(_read(path))
        if doc.get("kind") != kind:
            raise FormatError(f"{path} is not a {kind} file")
        return PvdParams.from_dict(doc["params"]), bytes.fromhex(doc["key"])
    except (json.JSONDecodeError, KeyError, TypeError, AttributeError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"bad {kind} file {path}: {e}") from None


def bundle(cts: list[QCiphertext]) -> bytes:
    out = [BUNDLE_MAGIC, struct.pack(">I", len(cts))]
    for ct in cts:
        blob = ct.to_bytes()
        out += [struct.pack(">I", len(blob)), blob]
    return b"".join(out)


def unbundle(data: bytes) -> list[QCiphertext]:
    if data[:4] != BUNDLE_MAGIC or len(data) < 8:
        raise MalformedCiphertext("not a ciphertext bundle (bad magic)")
    (count,) = struct.unpack(">I", data[4:8])
    pos, cts = 8, []
    for _ in range(count):
        if pos + 4 > len(data):
            raise MalformedCiphertext("truncated ciphertext bundle")
        (n,) = struct.unpack(">I", data[pos : pos + 4])
        if pos + 4 + n > len(data):
            raise MalformedCiphertext("truncated ciphertext bundle")
        cts.append(QCiphertext.from_bytes(data[pos + 4 : pos + 4 + n]))
        pos += 4 + n
    if pos != len(data) or not cts:
        raise MalformedCiphertext("trailing bytes or empty bundle")
    return cts


def vk_file(vks: list[VerificationKey]) -> bytes:
    if len(vks) == 1:
        return (vks[0].to_json() + "\n").encode()
    doc = {"params": vks[0].params.to_dict(), "vk": [vk.hex() for vk in vks]}
    return (json.dumps(doc, sort_keys=True) + "\n").encode()


def load_vks(path) -> list[VerificationKey]:
    try:
        doc = json.loads(_read(path))
        params = SigParams.from_dict(doc["params"])
        hexes = doc["vk"] if isinstance(doc["vk"], list) else [doc["vk"]]
        return [VerificationKey.from_hex(params, h) for h in hexes]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"bad verification key file {path}: {e}") from None


def tombstone(ct_path) -> Path:
    return Path(str(ct_path) + ".consumed")


def _consume(ct_path) -> None:
    if tombstone(ct_path).exists():
        raise CiphertextConsumed(f"ciphertext consumed: {ct_path} was already decrypted or deleted")


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _canonical(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def report_bytes(report: dict) -> bytes:
    return (json.dumps(_canonical(report), sort_keys=True, indent=2) + "\n").encode()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _rng(args) -> Rng:
    seed = args.seed if args.seed is not None else os.environ.get("PVD_SEED")
    try:
        return Rng(seed)
    except ValueError as e:
        raise UsageError(f"bad seed: {e}") from None


def _params(args, lam_default: int) -> PvdParams:
    lam = args.lam if args.lam is not None else lam_default
    if lam < 1:
        raise UsageError("--lambda must be at least 1")
    if args.lambda_f < 1:
        raise UsageError("--lambda-f must be at least 1")
    base = args.base or "ske"
    try:
        return PvdParams.create(lam, args.lambda_f, args.backend, "ske" if base == "ideal" else base)
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_keygen(args) -> int:
    params = _params(args, 16)
    if params.base == "ideal":
        raise UsageError("the ideal base scheme is experiment-only")
    pk, sk = PkePvd(params).gen(_rng(args))
    out = Path(args.out)
    write_atomic(out.with_name(out.name + ".pk"), key_file("pk", params, pk))
    write_atomic(out.with_name(out.name + ".sk"), key_file("sk", params, sk), mode=0o600)
    return EXIT_OK


def cmd_encrypt(args) -> int:
    params, pk = load_key(args.pk, "pk")
    try:
        bits = Bits.from_str(args.message)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if len(bits) == 0:
        raise UsageError("message must have at least one bit")
    vks, cts = PkePvd(params).enc_str(pk, bits, _rng(args))
    out = Path(args.out)
    write_atomic(out.with_name(out.name + ".ct"), bundle(cts))
    write_atomic(out.with_name(out.name + ".vk"), vk_file(vks))
    return EXIT_OK


def cmd_decrypt(args) -> int:
    params, sk = load_key(args.sk, "sk")
    _consume(args.ct)
    cts = unbundle(_read(args.ct))
    for ct in cts:
        if ct.params != params:
            raise MalformedCiphertext("ciphertext parameters do not match the secret key")
    bits = PkePvd(params).dec_str(sk, cts, _rng(args))
    write_atomic(tombstone(args.ct), b"decrypted\n")
    print(bits)
    return EXIT_OK


def cmd_delete(args) -> int:
    _consume(args.ct)
    cts = unbundle(_read(args.ct))
    rng = _rng(args)
    lines = [pvd_del(ct, rng).to_hex() for ct in cts]
    write_atomic(Path(args.out), ("\n".join(lines) + "\n").encode())
    write_atomic(tombstone(args.ct), b"deleted\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    vks = load_vks(args.vk)
    lines = [ln for ln in _read(args.cert).decode(errors="replace").splitlines() if ln.strip()]
    if len(lines) != len(vks):
        raise FormatError(f"{len(lines)} certificates for {len(vks)} verification keys")
    for i, (vk, line) in enumerate(zip(vks, lines)):
        ok, reason = verify_certificate(vk, DeletionCertificate.from_hex(line, vk.params))
        if not ok:
            print(f"rejected: bit {i}: {reason}", file=sys.stderr)
            return EXIT_REJECT
    print("accepted")
    return EXIT_OK


def run_experiment(args) -> dict:
    rng = _rng(args)
    name = args.name
    if name in ("everlasting", "mask-posterior"):
        params = _params(args, 4)
        if params.lam > ORACLE_MAX_LAMBDA:
            raise CapExceeded(f"exact oracles are capped at lambda={ORACLE_MAX_LAMBDA}")
    else:
        params = _params(args, 16)
    trials = args.trials
    if trials < 1:
        raise UsageError("--trials must be positive")
    adversary = make_adversary(args.adversary) if args.adversary else None

    if name == "otu":
        return otu_report(params.sig, adversary or make_adversary("honest"), trials, rng)
    if name == "cd":
        return cd_report(params, adversary or make_adversary("honest"), trials, rng, args.b)
    if name == "everlasting":
        family = [adversary] if adversary else default_family(params.lam)
        reports = everlasting_oracle(
            params.lam,
            family,
            rng,
            idealize_base=(args.base or "ideal") == "ideal",
            lambda_f=params.sig.lambda_f,
            backend=params.sig.backend.name,
            trials=trials,
        )
        return {"experiment": "everlasting", "lambda": params.lam, "reports": [r.to_dict() for r in reports]}
    # mask-posterior: honest deletions, theta opened from the base ciphertext
    posteriors, degenerate = [], 0
    hidden = None
    for t in range(trials):
        out = run_cd_game(params, make_adversary("honest"), 0, rng.spawn(t))
        if out.transcript.theta.value == 0:
            degenerate += 1
            continue
        posteriors.append(mask_posterior(params.lam, out.transcript))
        if hidden is None:
            tr = out.transcript
            hidden = mask_posterior(params.lam, type(tr)(tr.lam, None, tr.basis, tr.outcome, tr.accepted))
    return {
        "experiment": "mask-posterior",
        "lambda": params.lam,
        "trials": trials,
        "degenerate_theta_trials": degenerate,
        "posterior_min": min(posteriors) if posteriors else None,
        "posterior_max": max(posteriors) if posteriors else None,
        "posterior_theta_hidden": hidden,
    }


def cmd_experiment(args) -> int:
    data = report_bytes(run_experiment(args))
    if args.out:
        write_atomic(Path(args.out), data)
    if args.golden:
        golden = Path(args.golden)
        if golden.exists():
            if golden.read_bytes() != data:
                print(f"golden mismatch: {golden}", file=sys.stderr)
                return EXIT_REJECT
        else:
            write_atomic(golden, data)
    if not args.out:
        sys.stdout.write(data.decode())
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _config_flags(p: argparse.ArgumentParser, bases) -> None:
    p.add_argument("--lambda", dest="lam", type=int, default=None, help="BB84 length (qubits)")
    p.add_argument("--lambda-f", type=int, default=128, help="preimage width in bits")
    p.add_argument("--backend", choices=sorted(BACKENDS), default="sha256")
    p.add_argument("--base", choices=bases, default=None)
    p.add_argument("--support-cap", type=int, default=None)
    p.add_argument("--density-cap", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pkepvd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def seed_flag(p):
        p.add_argument("--seed", default=None, help="hex seed, up to 256 bits (falls back to $PVD_SEED)")

    p = sub.add_parser("keygen", help="generate pk/sk files")
    _config_flags(p, sorted(k for k in BASE_SCHEMES if k != "ideal"))
    seed_flag(p)
    p.add_argument("--out", required=True, help="output prefix; writes PREFIX.pk and PREFIX.sk")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encrypt", help="encrypt a bit string")
    p.add_argument("--pk", required=True)
    p.add_argument("--message", required=True, help="bits, e.g. 0110")
    p.add_argument("--out", required=True, help="output prefix; writes PREFIX.ct and PREFIX.vk")
    seed_flag(p)
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("decrypt", help="decrypt a ciphertext file (consumes it)")
    p.add_argument("--sk", required=True)
    p.add_argument("--ct", required=True)
    seed_flag(p)
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("delete", help="delete a ciphertext file and write a certificate")
    p.add_argument("--ct", required=True)
    p.add_argument("--out", required=True)
    seed_flag(p)
    p.set_defaults(func=cmd_delete)

    p = sub.add_parser("verify", help="check a deletion certificate; exit 0 iff accepted")
    p.add_argument("--vk", required=True)
    p.add_argument("--cert", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", help="run a security experiment and emit a JSON report")
    p.add_argument("name", choices=EXPERIMENTS)
    _config_flags(p, sorted(BASE_SCHEMES))
    seed_flag(p)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--adversary", choices=list(ADVERSARIES), default=None)
    p.add_argument("--b", type=int, choices=(0, 1), default=0, help="challenge bit for the cd game")
    p.add_argument("--golden", default=None, help="compare against (or create) this report file")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "experiment" and args.trials is None:
        args.trials = DEFAULT_TRIALS[args.name]
    try:
        if getattr(args, "support_cap", None) is not None or getattr(args, "density_cap", None) is not None:
            try:
                qsim.set_caps(args.support_cap, args.density_cap)
            except ValueError as e:
                raise UsageError(str(e)) from None
        return args.func(args)
    except UsageError as e:
        parser.error(str(e))
    except CapExceeded as e:
        print(f"error: resource cap exceeded: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (FormatError, CiphertextConsumed, BaseDecryptionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
