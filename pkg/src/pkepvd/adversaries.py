"""Deletion adversaries, written as exact branch enumerators.

An adversary receives the public key and the signed BB84 state and returns
every outcome of its measurements: probability, submitted (x', sigma'), any
extra classical record it keeps, and the unmeasured residual it keeps. The
same description drives sampled games (pick one branch by its probability)
and exact oracles (sum over all branches).

Randomness the adversary uses for guesses comes from ``coins``; the oracle
rebuilds ``coins`` from one seed per call, so the strategy is a fixed
function across the enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .qsim import (
    Bits,
    SparseState,
    apply_h,
    drop_register,
    hadamard_branches,
    measure_computational,
    measurement_branches,
    sample_index,
)
from .rng import Rng
from .signature import (
    MSG,
    SIG,
    Signature,
    SigningKey,
    VerificationKey,
    coherent_unsign,
    message_for_signature,
    sig_sign,
)


@dataclass(frozen=True)
class Branch:
    prob: float
    x: Bits
    sigma: Signature
    record: tuple = ()
    residual: Optional[SparseState] = field(default=None, compare=False)
    keep: tuple[str, ...] = ()


def _split(vk: VerificationKey, label: Bits) -> tuple[Bits, Signature]:
    p = vk.params
    x = Bits(label.value >> p.sig_width, p.ell)
    sigma = Signature.from_packed(label.value & ((1 << p.sig_width) - 1), p.lambda_f, p.ell)
    return x, sigma


def _all_qubits(psi: SparseState) -> list[int]:
    return list(range(1, psi.width + 1))


class Adversary:
    name = "adversary"

    def branches(self, vk: VerificationKey, psi: SparseState, coins: Rng) -> list[Branch]:
        raise NotImplementedError

    def play(self, vk: VerificationKey, psi: SparseState, rng: Rng) -> Branch:
        """One sampled run: coins and the branch choice both come from ``rng``."""
        coins = Rng(rng.bytes(32))
        options = self.branches(vk, psi, coins)
        return options[sample_index([b.prob for b in options], rng)]

    def __repr__(self) -> str:
        return f"<{self.name}>"


class MeasureAll(Adversary):
    """Optionally pre-process MSG, measure MSG || SIG computationally, then ``respond``.

    ``play`` samples the single measurement instead of enumerating every branch.
    """

    def prepare(self, psi: SparseState) -> SparseState:
        return psi

    def respond(self, vk: VerificationKey, x: Bits, sigma: Signature, coins: Rng) -> tuple[Bits, Signature]:
        return x, sigma

    def branches(self, vk, psi, coins):
        psi = self.prepare(psi)
        out = []
        for label, p, _ in measurement_branches(psi, _all_qubits(psi)):
            out.append(Branch(p, *self.respond(vk, *_split(vk, label), coins)))
        return out

    def play(self, vk, psi, rng):
        coins = Rng(rng.bytes(32))
        psi = self.prepare(psi)
        label, _ = measure_computational(psi, _all_qubits(psi), rng)
        return Branch(1.0, *self.respond(vk, *_split(vk, label), coins))


class HonestDeleter(MeasureAll):
    """Measures MSG || SIG in the computational basis and submits the result."""

    name = "honest"


class HadamardEverything(MeasureAll):
    """Applies H to every MSG qubit, then measures MSG || SIG computationally."""

    name = "hadamard"

    def prepare(self, psi):
        for q in psi.layout.qubits(MSG):
            psi = apply_h(psi, q)
        return psi


class PartialMeasurement(Adversary):
    """Measures SIG and every MSG qubit except ``kept``; keeps MSG as its residual.

    Submitted bits at the kept positions are read off the measured signature.
    """

    def __init__(self, kept: tuple[int, ...]):
        if not kept or len(kept) > 2:
            raise ValueError("keep one or two MSG qubits")
        self.kept = tuple(sorted(kept))
        self.name = "partial" + "".join(f"-{k}" for k in self.kept)

    def branches(self, vk, psi, coins):
        msg = psi.layout.qubits(MSG)
        if max(self.kept) > len(msg):
            raise ValueError(f"kept position beyond MSG width {len(msg)}")
        sig = psi.layout.qubits(SIG)
        measured_msg = [q for q in msg if q - msg[0] + 1 not in self.kept]
        out = []
        for label, p, post in measurement_branches(psi, measured_msg + sig):
            sigma = Signature.from_packed(
                label.value & ((1 << vk.params.sig_width) - 1), vk.params.lambda_f, vk.params.ell
            )
            implied = message_for_signature(vk, sigma)
            measured = label.value >> vk.params.sig_width
            bits, k = [], len(measured_msg)
            for pos in range(1, len(msg) + 1):
                if pos in self.kept:
                    bits.append(implied[pos] if implied is not None else 0)
                else:
                    k -= 1
                    bits.append((measured >> k) & 1)
            residual = drop_register(post, SIG)
            out.append(Branch(p, Bits.from_bits(bits), sigma, (), residual, (MSG,)))
        return out


class SigOnlyMeasurer(Adversary):
    """Measures only SIG, submits the message that signature verifies under, keeps MSG."""

    name = "sig-only"

    def branches(self, vk, psi, coins):
        out = []
        for label, p, post in measurement_branches(psi, psi.layout.qubits(SIG)):
            sigma = Signature.from_packed(label.value, vk.params.lambda_f, vk.params.ell)
            implied = message_for_signature(vk, sigma)
            x = implied if implied is not None else Bits.zeros(vk.params.ell)
            out.append(Branch(p, x, sigma, (), drop_register(post, SIG), (MSG,)))
        return out


class NoMeasureGuesser(Adversary):
    """Submits a uniformly random certificate and keeps the ciphertext untouched."""

    name = "guess"

    def branches(self, vk, psi, coins):
        p = vk.params
        x = Bits(coins.bits(p.ell), p.ell)
        sigma = Signature(tuple(coins.bits(p.lambda_f) for _ in range(p.ell)), p.lambda_f)
        return [Branch(1.0, x, sigma, (), psi, (MSG,))]


class BitFlipForger(MeasureAll):
    """Measures honestly, flips every bit of x', and forges the matching preimages.

    Preimages come from the backend's inverse when it has one (identity), and
    are random guesses otherwise.
    """

    name = "bitflip"

    def respond(self, vk, x, sigma, coins):
        p = vk.params
        x = Bits(x.value ^ ((1 << p.ell) - 1), p.ell)
        w = []
        for i in range(p.ell):
            pre = p.backend.solve(vk.v[i][x[i + 1]])
            w.append(pre if pre is not None else coins.bits(p.lambda_f))
        return x, Signature(tuple(w), p.lambda_f)


class CoherentForger(Adversary):
    """Negative control for invertible backends.

    Recovers sigk from vk, uncomputes the signature, reads MSG in the
    Hadamard basis and signs whatever it got. The outcome is kept as its
    record, so on accepted runs it knows x at every theta=1 position.
    """

    name = "coherent"

    def branches(self, vk, psi, coins):
        p = vk.params
        u = []
        for i in range(p.ell):
            pair = tuple(p.backend.solve(vk.v[i][b]) for b in (0, 1))
            if None in pair:
                raise ValueError("coherent forger needs an invertible backend")
            u.append(pair)
        sigk = SigningKey(p, tuple(u))
        psi = coherent_unsign(sigk, psi)
        out = []
        for xbar, prob, _ in hadamard_branches(psi, psi.layout.qubits(MSG)):
            out.append(Branch(prob, xbar, sig_sign(sigk, xbar), (xbar.value,)))
        return out


def default_family(lam: int) -> list[Adversary]:
    """Every shipped deletion strategy that does not need an invertible backend."""
    family: list[Adversary] = [
        HonestDeleter(),
        HadamardEverything(),
        PartialMeasurement((1,)),
    ]
    if lam >= 2:
        family.append(PartialMeasurement((1, 2)))
    family += [SigOnlyMeasurer(), NoMeasureGuesser(), BitFlipForger()]
    return family


ADVERSARIES = {
    "honest": HonestDeleter,
    "hadamard": HadamardEverything,
    "partial1": lambda: PartialMeasurement((1,)),
    "partial2": lambda: PartialMeasurement((1, 2)),
    "sig-only": SigOnlyMeasurer,
    "guess": NoMeasureGuesser,
    "bitflip": BitFlipForger,
    "coherent": CoherentForger,
}


def make_adversary(name: str) -> Adversary:
    try:
        return ADVERSARIES[name]()
    except KeyError:
        raise ValueError(f"unknown adversary {name!r}; valid: {', '.join(ADVERSARIES)}") from None
