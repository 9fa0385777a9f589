import pytest
from hypothesis import given, strategies as st

from pkepvd.base import (
    BaseCiphertext,
    HashSke,
    IdealBase,
    base_dec,
    base_enc,
    decode_payload,
    encode_payload,
    make_base,
    payload_length,
    register_base_scheme,
)
from pkepvd.errors import BaseDecryptionError, MalformedCiphertext, PayloadDecodeError
from pkepvd.qsim import Bits
from pkepvd.rng import Rng


@given(st.integers(1, 300), st.integers(1, 20), st.data())
def test_payload_round_trip(sigk_width, lam, data):
    sigk = data.draw(st.integers(0, 2**sigk_width - 1))
    theta = Bits(data.draw(st.integers(0, 2**lam - 1)), lam)
    beta = data.draw(st.integers(0, 1))
    raw = encode_payload(sigk, sigk_width, theta, beta)
    assert len(raw) == payload_length(sigk_width, lam)
    assert decode_payload(raw, sigk_width, lam) == (sigk, theta, beta)


def test_payload_layout_is_sigk_theta_beta():
    raw = encode_payload(0b101, 3, Bits.from_str("11"), 1)
    # 101 11 00000001 then 3 zero pad bits
    assert raw == bytes([0b10111000, 0b00001000])


def test_payload_decode_errors():
    raw = encode_payload(1, 4, Bits.from_str("1"), 0)
    with pytest.raises(PayloadDecodeError):
        decode_payload(raw + b"\0", 4, 1)
    with pytest.raises(PayloadDecodeError):
        decode_payload(bytes([raw[0], raw[1] | 1]), 4, 1)


@pytest.mark.parametrize("scheme", [HashSke(), IdealBase()])
def test_base_round_trip(scheme):
    rng = Rng(1)
    pk, sk = scheme.gen(16, rng)
    for n in (1, 17, 200):
        payload = rng.bytes(n)
        assert base_dec(scheme, sk, base_enc(scheme, pk, payload, rng)) == payload


def test_ske_tamper_and_wrong_key():
    s, rng = HashSke(), Rng(2)
    pk, sk = s.gen(8, rng)
    ct = base_enc(s, pk, b"hello", rng)
    bad = BaseCiphertext(ct.tag, ct.body[:-1] + bytes([ct.body[-1] ^ 1]))
    with pytest.raises(BaseDecryptionError):
        base_dec(s, sk, bad)
    with pytest.raises(BaseDecryptionError):
        base_dec(s, rng.bytes(32), ct)


def test_ideal_ciphertext_independent_of_payload():
    a, b = IdealBase(), IdealBase()
    rng = Rng(3)
    assert a.enc(b"", b"\x00" * 9, rng).to_bytes() == b.enc(b"", b"\xff" * 9, rng).to_bytes()


def test_tag_mismatch_and_magic():
    ct = base_enc(IdealBase(), b"", b"x", Rng(4))
    with pytest.raises(MalformedCiphertext):
        base_dec(HashSke(), b"k" * 32, ct)
    with pytest.raises(MalformedCiphertext):
        BaseCiphertext.from_bytes(b"XXXX\x01")
    assert BaseCiphertext.from_bytes(ct.to_bytes()) == ct


def test_registry():
    with pytest.raises(ValueError, match="ideal"):
        make_base("rsa")
    with pytest.raises(ValueError):
        register_base_scheme("ske", HashSke)
