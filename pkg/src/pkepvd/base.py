"""Base encryption plugged into the deletion compiler, and the payload codec.

Shipped schemes:

* ``ske``: secret-key encryption from a SHA-256 counter keystream with an
  HMAC-SHA256 tag (pk = sk). Correctness-grade only.
* ``ideal``: a test double whose ciphertext bytes never depend on the
  payload. Decryption reads a table hidden inside the instance, so it stands
  in for a perfectly hiding scheme that an unbounded party can still open.

Any object with ``name``, ``tag``, ``gen``, ``enc`` and ``dec`` (see
``BaseScheme``) can be registered with ``register_base_scheme``, which is the
hook for a real public-key scheme.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass
from typing import Callable, Protocol

from .errors import BaseDecryptionError, MalformedCiphertext, PayloadDecodeError
from .qsim import Bits
from .rng import Rng

MAGIC = b"PVDB"
HEADER_LEN = len(MAGIC) + 1


@dataclass(frozen=True)
class BaseCiphertext:
    tag: int
    body: bytes

    def to_bytes(self) -> bytes:
        return MAGIC + bytes([self.tag]) + self.body

    @classmethod
    def from_bytes(cls, data: bytes) -> BaseCiphertext:
        if len(data) < HEADER_LEN or data[:4] != MAGIC:
            raise MalformedCiphertext("base ciphertext: bad magic")
        return cls(data[4], data[HEADER_LEN:])


class BaseScheme(Protocol):
    name: str
    tag: int

    def gen(self, lam: int, rng: Rng) -> tuple[bytes, bytes]: ...

    def enc(self, pk: bytes, payload: bytes, rng: Rng) -> BaseCiphertext: ...

    def dec(self, sk: bytes, ct: BaseCiphertext) -> bytes: ...


def _keystream(key: bytes, nonce: bytes, length: int) -> bytes:
    out = bytearray()
    counter = 0
    while len(out) < length:
        out += hashlib.sha256(key + nonce + struct.pack(">Q", counter)).digest()
        counter += 1
    return bytes(out[:length])


class HashSke:
    """nonce(16) || payload xor keystream || HMAC-SHA256(key, nonce || c)[:16]."""

    name = "ske"
    tag = 1
    KEY_LEN = 32
    NONCE_LEN = 16
    MAC_LEN = 16

    def gen(self, lam: int, rng: Rng) -> tuple[bytes, bytes]:
        key = rng.bytes(self.KEY_LEN)
        return key, key

    def _mac(self, key: bytes, data: bytes) -> bytes:
        return hmac.new(key, data, hashlib.sha256).digest()[: self.MAC_LEN]

    def enc(self, pk: bytes, payload: bytes, rng: Rng) -> BaseCiphertext:
        nonce = rng.bytes(self.NONCE_LEN)
        c = bytes(a ^ b for a, b in zip(payload, _keystream(pk, nonce, len(payload))))
        return BaseCiphertext(self.tag, nonce + c + self._mac(pk, nonce + c))

    def dec(self, sk: bytes, ct: BaseCiphertext) -> bytes:
        body = ct.body
        if len(body) <= self.NONCE_LEN + self.MAC_LEN:
            raise MalformedCiphertext("ske ciphertext too short")
        nonce, c, mac = body[: self.NONCE_LEN], body[self.NONCE_LEN : -self.MAC_LEN], body[-self.MAC_LEN :]
        if not hmac.compare_digest(mac, self._mac(sk, nonce + c)):
            raise BaseDecryptionError("ske: authentication tag mismatch (wrong key or tampered ciphertext)")
        return bytes(a ^ b for a, b in zip(c, _keystream(sk, nonce, len(c))))


class IdealBase:
    """Ciphertext = 8-byte sequence number of the call; payload goes to a private table."""

    name = "ideal"
    tag = 2

    def __init__(self):
        self._table: dict[int, bytes] = {}

    def gen(self, lam: int, rng: Rng) -> tuple[bytes, bytes]:
        return b"", b""

    def enc(self, pk: bytes, payload: bytes, rng: Rng) -> BaseCiphertext:
        handle = len(self._table)
        self._table[handle] = bytes(payload)
        return BaseCiphertext(self.tag, handle.to_bytes(8, "big"))

    def dec(self, sk: bytes, ct: BaseCiphertext) -> bytes:
        if len(ct.body) != 8:
            raise MalformedCiphertext("ideal ciphertext must be an 8-byte handle")
        try:
            return self._table[int.from_bytes(ct.body, "big")]
        except KeyError:
            raise BaseDecryptionError("ideal: unknown handle") from None


BASE_SCHEMES: dict[str, Callable[[], BaseScheme]] = {"ske": HashSke, "ideal": IdealBase}


def register_base_scheme(name: str, factory: Callable[[], BaseScheme]) -> None:
    if name in BASE_SCHEMES:
        raise ValueError(f"base scheme {name!r} already registered")
    BASE_SCHEMES[name] = factory


def make_base(name: str) -> BaseScheme:
    try:
        return BASE_SCHEMES[name]()
    except KeyError:
        raise ValueError(f"unknown base scheme {name!r}; valid: {', '.join(sorted(BASE_SCHEMES))}") from None


def base_gen(scheme: BaseScheme, lam: int, rng: Rng) -> tuple[bytes, bytes]:
    return scheme.gen(lam, rng)


def base_enc(scheme: BaseScheme, pk: bytes, payload: bytes, rng: Rng) -> BaseCiphertext:
    if not payload:
        raise ValueError("refusing to encrypt an empty payload")
    return scheme.enc(pk, payload, rng)


def base_dec(scheme: BaseScheme, sk: bytes, ct: BaseCiphertext) -> bytes:
    if ct.tag != scheme.tag:
        raise MalformedCiphertext(f"ciphertext tag {ct.tag} does not match scheme {scheme.name} ({scheme.tag})")
    return scheme.dec(sk, ct)


# ---------------------------------------------------------------------------
# payload (sigk, theta, beta)
# ---------------------------------------------------------------------------


def payload_length(sigk_width: int, lam: int) -> int:
    return (sigk_width + lam + 8 + 7) // 8


def encode_payload(sigk: int, sigk_width: int, theta: Bits, beta: int) -> bytes:
    """sigk || theta || beta-as-one-byte, big-endian, zero-padded at the end to a byte."""
    if sigk < 0 or sigk >> sigk_width:
        raise ValueError(f"sigk does not fit in {sigk_width} bits")
    if beta not in (0, 1):
        raise ValueError("beta must be 0 or 1")
    lam = len(theta)
    total = sigk_width + lam + 8
    nbytes = payload_length(sigk_width, lam)
    value = (((sigk << lam) | theta.value) << 8) | beta
    return (value << (8 * nbytes - total)).to_bytes(nbytes, "big")


def decode_payload(data: bytes, sigk_width: int, lam: int) -> tuple[int, Bits, int]:
    nbytes = payload_length(sigk_width, lam)
    if len(data) != nbytes:
        raise PayloadDecodeError(f"payload is {len(data)} bytes, expected {nbytes}")
    pad = 8 * nbytes - (sigk_width + lam + 8)
    value = int.from_bytes(data, "big")
    if value & ((1 << pad) - 1):
        raise PayloadDecodeError("nonzero payload padding")
    value >>= pad
    beta = value & 0xFF
    if beta not in (0, 1):
        raise PayloadDecodeError(f"beta byte {beta:#04x} is not 0 or 1")
    value >>= 8
    theta = Bits(value & ((1 << lam) - 1), lam)
    return value >> lam, theta, beta
