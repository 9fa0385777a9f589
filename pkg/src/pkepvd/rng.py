"""Deterministic random stream shared by every sampling path.

The stream is ChaCha20 keyed by a 256-bit seed, with an all-zero nonce and
counter starting at zero. Child streams (one per trial) are keyed by
SHA-256("pkepvd/spawn" || seed || index), so a trial can be replayed from
(seed, trial-index) alone.
"""

from __future__ import annotations

import hashlib
import os

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

_BLOCK = 4096
_SPAWN_TAG = b"pkepvd/spawn"


def parse_seed(seed: bytes | int | str | None) -> bytes:
    """Normalize a seed to 32 bytes.

    Hex strings shorter than 64 digits and non-negative ints are left-padded
    with zeros. ``None`` draws a fresh seed from the OS.
    """
    if seed is None:
        return os.urandom(32)
    if isinstance(seed, bytes):
        if len(seed) != 32:
            raise ValueError(f"seed must be 32 bytes, got {len(seed)}")
        return seed
    if isinstance(seed, str):
        text = seed.strip().lower()
        if text.startswith("0x"):
            text = text[2:]
        if not text or len(text) > 64:
            raise ValueError("seed must be 1..64 hex digits")
        try:
            value = int(text, 16)
        except ValueError:
            raise ValueError(f"seed is not hex: {seed!r}") from None
        return value.to_bytes(32, "big")
    if isinstance(seed, int):
        if seed < 0 or seed.bit_length() > 256:
            raise ValueError("integer seed must fit in 256 unsigned bits")
        return seed.to_bytes(32, "big")
    raise TypeError(f"unsupported seed type {type(seed).__name__}")


class Rng:
    """ChaCha20 keystream with helpers for bits, integers and floats."""

    def __init__(self, seed: bytes | int | str | None = None):
        self.seed = parse_seed(seed)
        self._enc = Cipher(algorithms.ChaCha20(self.seed, bytes(16)), mode=None).encryptor()
        self._buf = b""
        self._pos = 0

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed.hex()})"

    def bytes(self, n: int) -> bytes:
        if n < 0:
            raise ValueError("n must be non-negative")
        out = bytearray()
        while n > 0:
            if self._pos >= len(self._buf):
                self._buf = self._enc.update(bytes(_BLOCK))
                self._pos = 0
            take = min(n, len(self._buf) - self._pos)
            out += self._buf[self._pos:self._pos + take]
            self._pos += take
            n -= take
        return bytes(out)

    def bits(self, n: int) -> int:
        """Uniform integer in [0, 2**n). Excess high bits are dropped."""
        if n == 0:
            return 0
        nbytes = (n + 7) // 8
        return int.from_bytes(self.bytes(nbytes), "big") >> (8 * nbytes - n)

    def bit(self) -> int:
        return self.bits(1)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        k = (n - 1).bit_length()
        while True:
            v = self.bits(k)
            if v < n:
                return v

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return self.bits(53) / 9007199254740992.0

    def spawn(self, index: int) -> Rng:
        """Independent child stream for trial ``index``; does not advance self."""
        digest = hashlib.sha256(_SPAWN_TAG + self.seed + index.to_bytes(8, "big")).digest()
        return Rng(digest)
