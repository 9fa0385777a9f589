"""Security games and exact desk-scale oracles.

``run_otu_game`` and ``run_cd_game`` play single sampled rounds.
``everlasting_oracle`` enumerates every (x, theta) and every adversary
branch and returns the exact trace distance between the b=0 and b=1
outputs of the deletion experiment. ``mask_posterior`` is the exact
Bayesian posterior of the mask parity given a deletion transcript.

The distinguisher in the oracle is unbounded: its view is the adversary's
kept quantum register, the adversary's classical record (x', sigma',
extra outcomes, coins), and the opened base ciphertext (theta, beta).
The adversary itself never reads the base ciphertext.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .adversaries import Adversary
from .base import base_dec, base_enc, decode_payload, encode_payload, make_base
from .pvd import DeletionCertificate, PkePvd, PvdParams, parity, pvd_vrfy
from .qsim import Bits, SparseState, apply_h, outcome_probabilities, prepare_bb84, reduced_block, trace_norm
from .rng import Rng
from .signature import SigParams, sig_gen, sig_vrfy, signed_bb84


def mismatch_at_computational(x: Bits, x_prime: Bits, theta: Bits) -> bool:
    """x_i != x'_i for some i with theta_i = 0."""
    full = (1 << len(theta)) - 1
    return bool((x.value ^ x_prime.value) & ~theta.value & full)


# ---------------------------------------------------------------------------
# one-time unforgeability game
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OtuOutcome:
    win: bool
    mismatch: bool
    verified: bool
    x: str
    theta: str
    x_prime: str


def run_otu_game(params: SigParams, adversary: Adversary, rng: Rng) -> OtuOutcome:
    """Keys, then x and theta, then |psi> to the adversary; win = mismatch and verify."""
    keys = sig_gen(params, rng)
    x = Bits(rng.bits(params.ell), params.ell)
    theta = Bits(rng.bits(params.ell), params.ell)
    psi = signed_bb84(keys.sigk, x, theta)
    branch = adversary.play(keys.vk, psi, rng)
    verified = sig_vrfy(keys.vk, branch.x, branch.sigma)
    mismatch = mismatch_at_computational(x, branch.x, theta)
    return OtuOutcome(mismatch and verified, mismatch, verified, str(x), str(theta), str(branch.x))


def otu_report(params: SigParams, adversary: Adversary, trials: int, rng: Rng) -> dict:
    wins = verified = 0
    for t in range(trials):
        out = run_otu_game(params, adversary, rng.spawn(t))
        wins += out.win
        verified += out.verified
    return {
        "experiment": "otu",
        "adversary": adversary.name,
        "lambda": params.ell,
        "lambda_f": params.lambda_f,
        "backend": params.backend.name,
        "trials": trials,
        "win_rate": wins / trials,
        "verify_rate": verified / trials,
    }


# ---------------------------------------------------------------------------
# certified deletion game
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeletionTranscript:
    """What an unbounded party holds after a deletion run.

    ``basis[i]`` is 'c' (computational), 'h' (Hadamard) or '-' (not
    measured) for position i+1; ``outcome`` holds the measured bits.
    ``theta`` is None when the basis string stays hidden.
    """

    lam: int
    theta: Optional[Bits]
    basis: str
    outcome: Bits
    accepted: bool


@dataclass
class CdOutcome:
    accepted: bool
    forge: bool
    residual: Optional[SparseState]
    keep: tuple
    x: Bits
    theta: Bits
    cert: DeletionCertificate
    transcript: DeletionTranscript = field(repr=False)

    @property
    def output(self):
        """The challenger's output: the residual (possibly empty) or None for the reject symbol."""
        return (self.residual, self.keep) if self.accepted else None


def run_cd_game(params: PvdParams, adversary: Adversary, b: int, rng: Rng) -> CdOutcome:
    """Gen, Enc(pk, b), adversary deletes, challenger verifies."""
    if b not in (0, 1):
        raise ValueError("b must be 0 or 1")
    scheme = PkePvd(params)
    pk, sk = scheme.gen(rng)
    lam = params.lam
    x = Bits(rng.bits(lam), lam)
    theta = Bits(rng.bits(lam), lam)
    vk, ct = scheme.enc(pk, b, rng, x=x, theta=theta)
    branch = adversary.play(vk, ct.peek(), rng)
    cert = DeletionCertificate(branch.x, branch.sigma)
    accepted = pvd_vrfy(vk, cert)
    forge = accepted and mismatch_at_computational(x, branch.x, theta)
    transcript = DeletionTranscript(lam, theta, "c" * lam, branch.x, accepted)
    residual = branch.residual if accepted else None
    return CdOutcome(accepted, forge, residual, branch.keep, x, theta, cert, transcript)


def cd_report(params: PvdParams, adversary: Adversary, trials: int, rng: Rng, b: int = 0) -> dict:
    accepted = forged = 0
    for t in range(trials):
        out = run_cd_game(params, adversary, b, rng.spawn(t))
        accepted += out.accepted
        forged += out.forge
    return {
        "experiment": "cd",
        "adversary": adversary.name,
        "lambda": params.lam,
        "lambda_f": params.sig.lambda_f,
        "backend": params.sig.backend.name,
        "base": params.base,
        "b": b,
        "trials": trials,
        "acceptance_rate": accepted / trials,
        "forge_rate": forged / trials,
    }


# ---------------------------------------------------------------------------
# exact everlasting oracle
# ---------------------------------------------------------------------------


@dataclass
class ExperimentReport:
    adversary: str
    lam: int
    backend: str
    base: str
    idealized: bool
    trials: int
    acceptance: float
    forge_rate: float
    trace_distance: float
    trace_distance_nondegenerate: float
    degenerate_accept_mass: float
    trace_distance_conditioned: float
    trace_distance_classical: float
    per_trial: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


ORACLE_MAX_LAMBDA = 6


def _trial_oracle(params: PvdParams, adversary: Adversary, idealize: bool, rng: Rng) -> dict:
    lam = params.lam
    keys = sig_gen(params.sig, rng)
    coin_seed = rng.bytes(32)
    base = make_base("ideal" if idealize else params.base)
    pk, sk = base.gen(lam, rng)
    sigk_packed = keys.sigk.packed()
    weight = 2.0 ** (-2 * lam)

    # blocks[b][(theta, beta, x', sigma', record)] -> unnormalized residual matrix
    blocks: tuple[dict, dict] = ({}, {})
    reject = [[], []]
    accept_w: list[float] = []
    forge_w: list[float] = []
    degenerate_w: list[float] = []
    vrfy_cache: dict = {}

    for theta_v in range(1 << lam):
        theta = Bits(theta_v, lam)
        for x_v in range(1 << lam):
            x = Bits(x_v, lam)
            psi = signed_bb84(keys.sigk, x, theta)
            par = parity(x, theta)
            branches = adversary.branches(keys.vk, psi, Rng(coin_seed))
            opened = []
            for b in (0, 1):
                payload = encode_payload(sigk_packed, params.sig.sigk_width, theta, b ^ par)
                ct = base_enc(base, pk, payload, rng)
                _, theta_seen, beta_seen = decode_payload(base_dec(base, sk, ct), params.sig.sigk_width, lam)
                opened.append((theta_seen.value, beta_seen))
            for br in branches:
                w = weight * br.prob
                key = (br.x.value, br.sigma.packed())
                ok = vrfy_cache.get(key)
                if ok is None:
                    ok = vrfy_cache[key] = sig_vrfy(keys.vk, br.x, br.sigma)
                if not ok:
                    for b in (0, 1):
                        reject[b].append(w)
                    continue
                accept_w.append(w)
                if theta_v == 0:
                    degenerate_w.append(w)
                if mismatch_at_computational(x, br.x, theta):
                    forge_w.append(w)
                rho = reduced_block(br.residual, br.keep) if br.residual is not None else np.ones((1, 1))
                for b in (0, 1):
                    k = opened[b] + key + (br.record,)
                    blocks[b][k] = blocks[b][k] + w * rho if k in blocks[b] else w * rho

    td = td_nondeg = td_classical = 0.0
    acc = [0.0, 0.0]
    for b in (0, 1):
        acc[b] = math.fsum(float(np.real(np.trace(m))) for m in blocks[b].values())
    cond = 0.0
    for key in set(blocks[0]) | set(blocks[1]):
        m0, m1 = blocks[0].get(key), blocks[1].get(key)
        m0 = np.zeros_like(m1) if m0 is None else m0
        m1 = np.zeros_like(m0) if m1 is None else m1
        diff = trace_norm(m0 - m1)
        td += diff
        if key[0] != 0:
            td_nondeg += diff
        td_classical += abs(float(np.real(np.trace(m0 - m1))))
        if acc[0] > 0 and acc[1] > 0:
            cond += trace_norm(m0 / acc[0] - m1 / acc[1])
    reject_gap = abs(math.fsum(reject[0]) - math.fsum(reject[1]))
    return {
        "acceptance": math.fsum(accept_w),
        "forge_rate": math.fsum(forge_w),
        "degenerate_accept_mass": math.fsum(degenerate_w),
        "trace_distance": 0.5 * (td + reject_gap),
        "trace_distance_nondegenerate": 0.5 * td_nondeg,
        "trace_distance_conditioned": 0.5 * cond,
        "trace_distance_classical": 0.5 * (td_classical + reject_gap),
    }


def everlasting_oracle(
    lam: int,
    adversaries: Sequence[Adversary],
    rng: Rng,
    *,
    idealize_base: bool = True,
    lambda_f: int = 128,
    backend: str = "sha256",
    trials: int = 1,
) -> list[ExperimentReport]:
    """Exact deletion-experiment trace distance for each adversary.

    Each trial samples one key pair and one set of adversary coins; x and
    theta are enumerated exhaustively with their uniform weights. Reported
    trace distances are the maximum over trials, rates the mean.
    """
    if not 1 <= lam <= ORACLE_MAX_LAMBDA:
        raise ValueError(f"oracle needs 1 <= lambda <= {ORACLE_MAX_LAMBDA}")
    params = PvdParams.create(lam, lambda_f, backend, "ske")
    reports = []
    for adv in adversaries:
        runs = [_trial_oracle(params, adv, idealize_base, rng.spawn(t)) for t in range(trials)]
        reports.append(
            ExperimentReport(
                adversary=adv.name,
                lam=lam,
                backend=backend,
                base="ideal" if idealize_base else params.base,
                idealized=idealize_base,
                trials=trials,
                acceptance=math.fsum(r["acceptance"] for r in runs) / trials,
                forge_rate=math.fsum(r["forge_rate"] for r in runs) / trials,
                trace_distance=max(r["trace_distance"] for r in runs),
                trace_distance_nondegenerate=max(r["trace_distance_nondegenerate"] for r in runs),
                degenerate_accept_mass=math.fsum(r["degenerate_accept_mass"] for r in runs) / trials,
                trace_distance_conditioned=max(r["trace_distance_conditioned"] for r in runs),
                trace_distance_classical=max(r["trace_distance_classical"] for r in runs),
                per_trial=runs,
            )
        )
    return reports


# ---------------------------------------------------------------------------
# mask posterior
# ---------------------------------------------------------------------------


def _likelihood(x: Bits, theta: Bits, basis: str, outcome: Bits) -> float:
    state = prepare_bb84(x, theta)
    measured = [i for i, c in enumerate(basis, start=1) if c != "-"]
    for q in measured:
        if basis[q - 1] == "h":
            state = apply_h(state, q)
    observed = 0
    for q in measured:
        observed = (observed << 1) | outcome[q]
    return outcome_probabilities(state, measured).get(observed, 0.0)


def mask_posterior(lam: int, transcript: DeletionTranscript) -> float:
    """Pr[parity of x over theta=1 positions is 1 | transcript], uniform prior on x (and theta if hidden).

    Exact enumeration; each likelihood is a Born probability computed from
    the BB84 state. For an honest deletion the signature register is a
    function of the measured MSG bits, so MSG alone determines the likelihood.
    """
    if not transcript.accepted:
        raise ValueError("posterior is only defined for accepted transcripts")
    if transcript.lam != lam or len(transcript.basis) != lam or len(transcript.outcome) != lam:
        raise ValueError("transcript does not match lambda")
    if any(c not in "ch-" for c in transcript.basis):
        raise ValueError("basis entries must be 'c', 'h' or '-'")
    thetas = [transcript.theta] if transcript.theta is not None else [Bits(t, lam) for t in range(1 << lam)]
    odd, total = [], []
    for theta in thetas:
        for x_v in range(1 << lam):
            x = Bits(x_v, lam)
            like = _likelihood(x, theta, transcript.basis, transcript.outcome)
            total.append(like)
            if parity(x, theta):
                odd.append(like)
    z = math.fsum(total)
    if z == 0.0:
        raise ValueError("transcript has probability zero")
    return math.fsum(odd) / z
