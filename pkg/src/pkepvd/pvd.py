"""Public-key encryption with publicly verifiable deletion.

Encryption of a bit m:

1. sample x, theta <- {0,1}^lambda and a fresh signature key pair;
2. coherently sign the BB84 state |x>_theta into |psi> on MSG || SIG;
3. encrypt (sigk, theta, m xor parity of x on the theta=1 positions) under
   the base scheme.

Deletion measures |psi> in the computational basis and outputs the pair
(x', sigma'); anyone holding vk checks it with the signature verifier.
Decryption uncomputes the signature, reads the theta=1 positions in the
Hadamard basis and unmasks.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from typing import Optional, Sequence

from .base import BaseCiphertext, BaseScheme, base_dec, base_enc, decode_payload, encode_payload, make_base
from .errors import CiphertextConsumed, FormatError, MalformedCertificate, MalformedCiphertext
from .qsim import Bits, BitsLike, SparseState, as_bits, measure_computational, measure_hadamard
from .rng import Rng
from .signature import (
    MSG,
    SIG,
    SigningKey,
    SigParams,
    Signature,
    VerificationKey,
    coherent_unsign,
    sig_gen,
    sig_vrfy,
    signed_bb84,
)

log = logging.getLogger(__name__)

CT_MAGIC = b"PVDC"
CT_VERSION = 1


def parity(x: Bits, mask: Bits) -> int:
    """XOR of x_i over positions with mask_i = 1 (0 for an empty mask)."""
    return bin(x.value & mask.value).count("1") & 1


@dataclass(frozen=True)
class PvdParams:
    lam: int
    sig: SigParams
    base: str = "ske"

    def __post_init__(self):
        if self.lam < 1:
            raise ValueError("lambda must be at least 1")
        if self.sig.ell != self.lam:
            raise ValueError(f"signature message length {self.sig.ell} != lambda {self.lam}")

    @classmethod
    def create(cls, lam: int, lambda_f: int = 128, backend: str = "sha256", base: str = "ske") -> PvdParams:
        if lam < 1:
            raise ValueError("lambda must be at least 1")
        make_base(base)
        return cls(lam, SigParams.create(lam, lambda_f, backend), base)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "sig": self.sig.to_dict(), "base": self.base}

    @classmethod
    def from_dict(cls, d: dict) -> PvdParams:
        try:
            return cls(int(d["lambda"]), SigParams.from_dict(d["sig"]), str(d["base"]))
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"bad scheme params {d!r}") from e


class QCiphertext:
    """Quantum part |psi> plus the classical base ciphertext.

    The quantum part may be consumed once, by ``take`` (decrypt or delete).
    ``peek`` exists for experiment harnesses that model adversaries.
    """

    def __init__(self, params: PvdParams, psi: SparseState, base_ct: BaseCiphertext):
        self.params = params
        self._psi = psi
        self.base_ct = base_ct
        self.consumed = False

    def peek(self) -> SparseState:
        return self._psi

    def take(self) -> SparseState:
        if self.consumed:
            raise CiphertextConsumed("quantum ciphertext was already decrypted or deleted")
        self.consumed = True
        return self._psi

    def to_bytes(self) -> bytes:
        header = json.dumps(self.params.to_dict(), sort_keys=True).encode()
        state = self._psi.to_json().encode()
        return (
            CT_MAGIC
            + bytes([CT_VERSION])
            + struct.pack(">I", len(header))
            + header
            + struct.pack(">I", len(state))
            + state
            + self.base_ct.to_bytes()
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> QCiphertext:
        try:
            if data[:4] != CT_MAGIC:
                raise MalformedCiphertext("not a ciphertext file (bad magic)")
            if data[4] != CT_VERSION:
                raise MalformedCiphertext(f"unsupported ciphertext version {data[4]}")
            pos = 5
            (n,) = struct.unpack(">I", data[pos : pos + 4])
            params = PvdParams.from_dict(json.loads(data[pos + 4 : pos + 4 + n]))
            pos += 4 + n
            (n,) = struct.unpack(">I", data[pos : pos + 4])
            psi = SparseState.from_json(data[pos + 4 : pos + 4 + n].decode())
            pos += 4 + n
            base_ct = BaseCiphertext.from_bytes(data[pos:])
        except (IndexError, struct.error, UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
            raise MalformedCiphertext(f"truncated or corrupt ciphertext: {e}") from e
        except ValueError as e:
            if isinstance(e, FormatError):
                raise
            raise MalformedCiphertext(f"corrupt ciphertext: {e}") from e
        if psi.layout.registers != ((MSG, params.lam), (SIG, params.sig.sig_width)):
            raise MalformedCiphertext(f"quantum part layout {psi.layout.registers} does not match header")
        return cls(params, psi, base_ct)


@dataclass(frozen=True)
class DeletionCertificate:
    x: Bits
    sigma: Signature

    def to_hex(self) -> str:
        return self.x.hex() + self.sigma.hex()

    @classmethod
    def from_hex(cls, text: str, params: SigParams) -> DeletionCertificate:
        text = text.strip().lower()
        nx = (params.ell + 3) // 4
        ns = 2 * ((params.sig_width + 7) // 8)
        if len(text) != nx + ns:
            raise MalformedCertificate(f"certificate has {len(text)} hex digits, expected {nx + ns}")
        try:
            x = Bits(int(text[:nx], 16), params.ell)
            sigma = Signature.from_hex(text[nx:], params.lambda_f, params.ell)
        except ValueError as e:
            raise MalformedCertificate(f"bad certificate: {e}") from e
        return cls(x, sigma)


# ---------------------------------------------------------------------------
# the scheme
# ---------------------------------------------------------------------------


class PkePvd:
    """Gen / Enc / Dec over a chosen base scheme. Del and Vrfy are keyless module functions."""

    def __init__(self, params: PvdParams, base: Optional[BaseScheme] = None):
        self.params = params
        self.base = base if base is not None else make_base(params.base)
        if self.base.name != params.base:
            raise ValueError(f"base scheme {self.base.name} != params.base {params.base}")

    def gen(self, rng: Rng) -> tuple[bytes, bytes]:
        return self.base.gen(self.params.lam, rng)

    def enc(
        self,
        pk: bytes,
        m: int,
        rng: Rng,
        *,
        x: Optional[BitsLike] = None,
        theta: Optional[BitsLike] = None,
        cap: Optional[int] = None,
    ) -> tuple[VerificationKey, QCiphertext]:
        """Encrypt one bit. ``x`` and ``theta`` may be pinned for testing."""
        if m not in (0, 1):
            raise ValueError("plaintext must be a single bit")
        lam = self.params.lam
        x = Bits(rng.bits(lam), lam) if x is None else as_bits(x)
        theta = Bits(rng.bits(lam), lam) if theta is None else as_bits(theta)
        if len(x) != lam or len(theta) != lam:
            raise ValueError(f"x and theta must have {lam} bits")
        keys = sig_gen(self.params.sig, rng)
        psi = signed_bb84(keys.sigk, x, theta, cap)
        beta = m ^ parity(x, theta)
        payload = encode_payload(keys.sigk.packed(), self.params.sig.sigk_width, theta, beta)
        return keys.vk, QCiphertext(self.params, psi, base_enc(self.base, pk, payload, rng))

    def open_payload(self, sk: bytes, ct: QCiphertext) -> tuple[SigningKey, Bits, int]:
        """Decrypt and decode the base ciphertext to (sigk, theta, beta)."""
        raw = base_dec(self.base, sk, ct.base_ct)
        sigk, theta, beta = decode_payload(raw, self.params.sig.sigk_width, self.params.lam)
        return SigningKey.from_packed(self.params.sig, sigk), theta, beta

    def dec(self, sk: bytes, ct: QCiphertext, rng: Rng, cap: Optional[int] = None) -> int:
        sigk, theta, beta = self.open_payload(sk, ct)
        psi = coherent_unsign(sigk, ct.take())
        xbar, _ = measure_hadamard(psi, psi.layout.qubits(MSG), rng, cap)
        # outcomes at theta=0 positions are noise and are dropped here
        return beta ^ parity(xbar, theta)

    def enc_str(self, pk: bytes, bits: BitsLike, rng: Rng) -> tuple[list[VerificationKey], list[QCiphertext]]:
        """Independent single-bit encryptions, one per message bit."""
        bits = as_bits(bits)
        if len(bits) < 1:
            raise ValueError("message must have at least one bit")
        vks, cts = [], []
        for b in bits:
            vk, ct = self.enc(pk, b, rng)
            vks.append(vk)
            cts.append(ct)
        return vks, cts

    def dec_str(self, sk: bytes, cts: Sequence[QCiphertext], rng: Rng) -> Bits:
        if not cts:
            raise ValueError("no ciphertexts")
        return Bits.from_bits(self.dec(sk, ct, rng) for ct in cts)


def split_measurement(params: PvdParams, outcome: Bits) -> DeletionCertificate:
    """Cut a full MSG || SIG computational outcome into (x', sigma')."""
    width = params.sig.sig_width
    x = Bits(outcome.value >> width, params.lam)
    sigma = Signature.from_packed(outcome.value & ((1 << width) - 1), params.sig.lambda_f, params.lam)
    return DeletionCertificate(x, sigma)


def pvd_del(ct: QCiphertext, rng: Rng, keep_state: bool = False):
    """Measure the whole quantum part in the computational basis.

    Returns the certificate, or (certificate, post-measurement state) when
    ``keep_state`` is set; the latter is for experiment harnesses only.
    """
    psi = ct.take()
    outcome, post = measure_computational(psi, list(range(1, psi.width + 1)), rng)
    cert = split_measurement(ct.params, outcome)
    return (cert, post) if keep_state else cert


def verify_certificate(vk: VerificationKey, cert: DeletionCertificate) -> tuple[bool, str]:
    """Verdict plus a short reason. Uses nothing but vk and cert."""
    params = vk.params
    if len(cert.x) != params.ell:
        return False, f"malformed certificate: x' has {len(cert.x)} bits, expected {params.ell}"
    if len(cert.sigma.w) != params.ell or cert.sigma.width != params.lambda_f:
        return False, "malformed certificate: signature shape does not match vk"
    if sig_vrfy(vk, cert.x, cert.sigma):
        return True, "ok"
    return False, "signature does not verify"


def pvd_vrfy(vk: VerificationKey, cert: DeletionCertificate) -> bool:
    ok, reason = verify_certificate(vk, cert)
    if not ok and reason.startswith("malformed"):
        log.warning(reason)
    return ok


def pvd_del_str(cts: Sequence[QCiphertext], rng: Rng) -> list[DeletionCertificate]:
    return [pvd_del(ct, rng) for ct in cts]


def pvd_vrfy_str(vks: Sequence[VerificationKey], certs: Sequence[DeletionCertificate]) -> bool:
    if len(vks) != len(certs):
        raise ValueError(f"{len(vks)} verification keys but {len(certs)} certificates")
    if not vks:
        raise ValueError("nothing to verify")
    return all(pvd_vrfy(vk, c) for vk, c in zip(vks, certs))
