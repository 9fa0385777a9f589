"""Lamport-style deterministic signatures over a one-way function or planted problem.

A backend is anything with ``sample(rng) -> (instance, witness)`` and
``check(instance, witness) -> bool``. A one-way function ``f`` is the backend
whose sampler is ``w <- {0,1}^lambda_f, x = f(w)``; a planted problem plugs
in its own sampler and relation. Keys are ``v[i][b]`` (instances, public) and
``u[i][b]`` (witnesses, secret) for message position ``i`` and bit ``b``.

Signing is deterministic, which is what lets ``coherent_sign`` run it as a
reversible XOR map on a superposition of messages.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from .errors import FormatError
from .qsim import Bits, BitsLike, SparseState, append_classical_function, append_register, as_bits, prepare_bb84
from .rng import Rng

MSG = "MSG"
SIG = "SIG"


# ---------------------------------------------------------------------------
# backends
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OwfSpec:
    """A one-way function on ``in_width``-bit integers."""

    name: str
    in_width: int
    out_width: int
    fn: Callable[[int], int] = field(compare=False, repr=False)
    inverse: Optional[Callable[[int], int]] = field(default=None, compare=False, repr=False)

    def __call__(self, w: int) -> int:
        if w < 0 or w >> self.in_width:
            raise ValueError(f"OWF input does not fit in {self.in_width} bits")
        return self.fn(w)

    @property
    def witness_width(self) -> int:
        return self.in_width

    @property
    def instance_width(self) -> int:
        return self.out_width

    def sample(self, rng: Rng) -> tuple[int, int]:
        w = rng.bits(self.in_width)
        return self(w), w

    def check(self, instance: int, witness: int) -> bool:
        if witness < 0 or witness >> self.in_width:
            return False
        return self.fn(witness) == instance

    def solve(self, instance: int) -> Optional[int]:
        """A witness for ``instance`` if this backend is (deliberately) invertible."""
        return None if self.inverse is None else self.inverse(instance)


def sha256_owf(lambda_f: int = 128) -> OwfSpec:
    """SHA-256 of the big-endian input bytes, truncated to the top ``lambda_f`` bits."""
    if not 1 <= lambda_f <= 256:
        raise ValueError("sha256 backend needs 1 <= lambda_f <= 256")
    nbytes = (lambda_f + 7) // 8
    drop = 256 - lambda_f

    def f(w: int) -> int:
        return int.from_bytes(hashlib.sha256(w.to_bytes(nbytes, "big")).digest(), "big") >> drop

    return OwfSpec("sha256", lambda_f, lambda_f, f)


def identity_owf(lambda_f: int = 8) -> OwfSpec:
    """Invertible on purpose: only for negative-control experiments."""
    if lambda_f < 1:
        raise ValueError("lambda_f must be positive")
    return OwfSpec("identity", lambda_f, lambda_f, lambda w: w, inverse=lambda x: x)


@dataclass(frozen=True)
class PlantedProblem:
    """Sampler G and relation R of a planted NP problem (classical sampler)."""

    name: str
    instance_width: int
    witness_width: int
    sampler: Callable[[Rng], tuple[int, int]] = field(compare=False, repr=False)
    relation: Callable[[int, int], bool] = field(compare=False, repr=False)
    solver: Optional[Callable[[int], int]] = field(default=None, compare=False, repr=False)

    def sample(self, rng: Rng) -> tuple[int, int]:
        return self.sampler(rng)

    def check(self, instance: int, witness: int) -> bool:
        if witness < 0 or witness >> self.witness_width:
            return False
        return bool(self.relation(instance, witness))

    def solve(self, instance: int) -> Optional[int]:
        return None if self.solver is None else self.solver(instance)


def owf_planted(owf: OwfSpec) -> PlantedProblem:
    """The planted problem R = {(f(w), w)} with sampler w <- uniform."""

    def sampler(rng: Rng) -> tuple[int, int]:
        w = rng.bits(owf.in_width)
        return owf(w), w

    return PlantedProblem(
        f"planted-{owf.name}",
        owf.out_width,
        owf.in_width,
        sampler,
        lambda x, w: owf(w) == x,
        solver=owf.inverse,
    )


def planted_sample(problem: PlantedProblem, rng: Rng) -> tuple[int, int]:
    return problem.sample(rng)


def planted_check(problem: PlantedProblem, instance: int, witness: int) -> bool:
    return problem.check(instance, witness)


Backend = Union[OwfSpec, PlantedProblem]

BACKENDS: dict[str, Callable[[int], Backend]] = {
    "sha256": sha256_owf,
    "identity": identity_owf,
    "planted-sha256": lambda n: owf_planted(sha256_owf(n)),
    "planted-identity": lambda n: owf_planted(identity_owf(n)),
}


def make_backend(name: str, lambda_f: int) -> Backend:
    try:
        factory = BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; valid: {', '.join(sorted(BACKENDS))}") from None
    return factory(lambda_f)


# ---------------------------------------------------------------------------
# parameters, keys, signatures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SigParams:
    ell: int
    backend: Backend

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("message length ell must be at least 1")

    @classmethod
    def create(cls, ell: int, lambda_f: int = 128, backend: str = "sha256") -> SigParams:
        return cls(ell, make_backend(backend, lambda_f))

    @property
    def lambda_f(self) -> int:
        return self.backend.witness_width

    @property
    def image_width(self) -> int:
        return self.backend.instance_width

    @property
    def sig_width(self) -> int:
        return self.ell * self.lambda_f

    @property
    def sigk_width(self) -> int:
        return 2 * self.ell * self.lambda_f

    @property
    def vk_width(self) -> int:
        return 2 * self.ell * self.image_width

    def to_dict(self) -> dict:
        return {"ell": self.ell, "lambda_f": self.lambda_f, "backend": self.backend.name}

    @classmethod
    def from_dict(cls, d: dict) -> SigParams:
        try:
            return cls.create(int(d["ell"]), int(d["lambda_f"]), str(d["backend"]))
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"bad signature params {d!r}") from e


def _pack(values: Sequence[int], width: int) -> int:
    out = 0
    for v in values:
        out = (out << width) | v
    return out


def _unpack(value: int, width: int, count: int) -> list[int]:
    mask = (1 << width) - 1
    return [(value >> (width * (count - 1 - k))) & mask for k in range(count)]


def _to_hex_bytes(value: int, bits: int) -> str:
    return value.to_bytes((bits + 7) // 8, "big").hex()


def _from_hex_bytes(text: str, bits: int) -> int:
    try:
        raw = bytes.fromhex(text)
    except ValueError as e:
        raise FormatError(f"not hex: {e}") from None
    if len(raw) != (bits + 7) // 8:
        raise FormatError(f"expected {(bits + 7) // 8} bytes, got {len(raw)}")
    value = int.from_bytes(raw, "big")
    if value >> bits:
        raise FormatError("nonzero padding bits")
    return value


@dataclass(frozen=True)
class VerificationKey:
    """``v[i][b]`` for i in 0..ell-1 (position i+1) and b in {0, 1}."""

    params: SigParams
    v: tuple[tuple[int, int], ...]

    def packed(self) -> int:
        return _pack([x for pair in self.v for x in pair], self.params.image_width)

    def hex(self) -> str:
        return _to_hex_bytes(self.packed(), self.params.vk_width)

    @classmethod
    def from_hex(cls, params: SigParams, text: str) -> VerificationKey:
        flat = _unpack(_from_hex_bytes(text, params.vk_width), params.image_width, 2 * params.ell)
        return cls(params, tuple(zip(flat[0::2], flat[1::2])))

    def to_json(self) -> str:
        return json.dumps({"params": self.params.to_dict(), "vk": self.hex()}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> VerificationKey:
        try:
            doc = json.loads(text)
            return cls.from_hex(SigParams.from_dict(doc["params"]), doc["vk"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise FormatError(f"bad verification key file: {e}") from e


@dataclass(frozen=True)
class SigningKey:
    params: SigParams
    u: tuple[tuple[int, int], ...]

    def packed(self) -> int:
        return _pack([x for pair in self.u for x in pair], self.params.lambda_f)

    def hex(self) -> str:
        return _to_hex_bytes(self.packed(), self.params.sigk_width)

    @classmethod
    def from_packed(cls, params: SigParams, value: int) -> SigningKey:
        flat = _unpack(value, params.lambda_f, 2 * params.ell)
        return cls(params, tuple(zip(flat[0::2], flat[1::2])))

    @classmethod
    def from_hex(cls, params: SigParams, text: str) -> SigningKey:
        return cls.from_packed(params, _from_hex_bytes(text, params.sigk_width))


@dataclass(frozen=True)
class SigKeyPair:
    vk: VerificationKey
    sigk: SigningKey

    def to_json(self) -> str:
        doc = {"params": self.vk.params.to_dict(), "vk": self.vk.hex(), "sigk": self.sigk.hex()}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> SigKeyPair:
        try:
            doc = json.loads(text)
            params = SigParams.from_dict(doc["params"])
            return cls(VerificationKey.from_hex(params, doc["vk"]), SigningKey.from_hex(params, doc["sigk"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise FormatError(f"bad key file: {e}") from e


@dataclass(frozen=True)
class Signature:
    """Components ``w[i]`` for positions i+1, each ``width`` bits."""

    w: tuple[int, ...]
    width: int

    def __post_init__(self):
        for x in self.w:
            if x < 0 or x >> self.width:
                raise ValueError(f"signature component does not fit in {self.width} bits")

    def packed(self) -> int:
        return _pack(self.w, self.width)

    @classmethod
    def from_packed(cls, value: int, width: int, count: int) -> Signature:
        if value < 0 or value >> (width * count):
            raise ValueError("packed signature too wide")
        return cls(tuple(_unpack(value, width, count)), width)

    def hex(self) -> str:
        return _to_hex_bytes(self.packed(), self.width * len(self.w))

    @classmethod
    def from_hex(cls, text: str, width: int, count: int) -> Signature:
        return cls.from_packed(_from_hex_bytes(text, width * count), width, count)


def sig_gen(params: SigParams, rng: Rng) -> SigKeyPair:
    """Sample (instance, witness) for i = 1..ell, b = 0 then 1, in that order."""
    v, u = [], []
    for _ in range(params.ell):
        pairs = [params.backend.sample(rng) for _ in (0, 1)]
        v.append((pairs[0][0], pairs[1][0]))
        u.append((pairs[0][1], pairs[1][1]))
    return SigKeyPair(VerificationKey(params, tuple(v)), SigningKey(params, tuple(u)))


def _message(params: SigParams, m: BitsLike) -> Bits:
    m = as_bits(m)
    if len(m) != params.ell:
        raise ValueError(f"message has {len(m)} bits, expected {params.ell}")
    return m


def sig_sign(sigk: SigningKey, m: BitsLike) -> Signature:
    m = _message(sigk.params, m)
    return Signature(tuple(sigk.u[i][m[i + 1]] for i in range(sigk.params.ell)), sigk.params.lambda_f)


def sig_vrfy(vk: VerificationKey, m: BitsLike, sigma: Signature) -> bool:
    params = vk.params
    m = _message(params, m)
    if len(sigma.w) != params.ell or sigma.width != params.lambda_f:
        raise ValueError(
            f"signature shape ({len(sigma.w)} x {sigma.width}) != ({params.ell} x {params.lambda_f})"
        )
    check = params.backend.check
    return all(check(vk.v[i][m[i + 1]], sigma.w[i]) for i in range(params.ell))


def message_for_signature(vk: VerificationKey, sigma: Signature) -> Optional[Bits]:
    """The message a signature verifies under, read off the public key, or None."""
    bits = []
    for i, w in enumerate(sigma.w):
        hits = [b for b in (0, 1) if vk.params.backend.check(vk.v[i][b], w)]
        if len(hits) != 1:
            return None
        bits.append(hits[0])
    return Bits.from_bits(bits)


def signing_function(sigk: SigningKey) -> Callable[[int], int]:
    """Sign as int -> int (message register value to packed signature).

    Uses one 256-entry table per message byte, so a call costs a few ORs.
    """
    ell, lf = sigk.params.ell, sigk.params.lambda_f
    tables = []
    for start in range(0, ell, 8):
        positions = list(range(start, min(start + 8, ell)))
        n = len(positions)
        shift_in = ell - start - n
        table = [0]
        # last position of the chunk is the least significant index bit
        for i in reversed(positions):
            shift = lf * (ell - 1 - i)
            a0, a1 = sigk.u[i][0] << shift, sigk.u[i][1] << shift
            table = [t | a0 for t in table] + [t | a1 for t in table]
        tables.append((shift_in, (1 << n) - 1, table))

    def sign(m: int) -> int:
        acc = 0
        for shift, mask, table in tables:
            acc |= table[(m >> shift) & mask]
        return acc

    return sign


def _check_layout(sigk: SigningKey, state: SparseState, msg: str, sig: str) -> None:
    params = sigk.params
    if state.layout.register_width(msg) != params.ell:
        raise ValueError(f"{msg} register width != ell={params.ell}")
    if state.layout.register_width(sig) != params.sig_width:
        raise ValueError(f"{sig} register width != signature width {params.sig_width}")


def coherent_sign(sigk: SigningKey, state: SparseState, msg: str = MSG, sig: str = SIG) -> SparseState:
    """|m>|t> -> |m>|t xor Sign(sigk, m)> on every branch."""
    _check_layout(sigk, state, msg, sig)
    return append_classical_function(state, msg, sig, signing_function(sigk), sigk.params.sig_width)


def coherent_unsign(sigk: SigningKey, state: SparseState, msg: str = MSG, sig: str = SIG) -> SparseState:
    # same XOR map; it is its own inverse
    return coherent_sign(sigk, state, msg, sig)


def signed_bb84(sigk: SigningKey, x: BitsLike, theta: BitsLike, cap: int | None = None) -> SparseState:
    """Coherently signed BB84 state on MSG || SIG."""
    state = prepare_bb84(x, theta, MSG, cap)
    state = append_register(state, SIG, sigk.params.sig_width)
    return coherent_sign(sigk, state)
