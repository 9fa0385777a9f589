import hashlib

import pytest
from hypothesis import given, settings, strategies as st

from pkepvd.errors import FormatError
from pkepvd.qsim import Bits, measurement_branches
from pkepvd.rng import Rng
from pkepvd.signature import (
    MSG,
    SIG,
    SigKeyPair,
    SigParams,
    Signature,
    SigningKey,
    VerificationKey,
    coherent_sign,
    coherent_unsign,
    identity_owf,
    make_backend,
    message_for_signature,
    owf_planted,
    planted_check,
    planted_sample,
    sha256_owf,
    sig_gen,
    sig_sign,
    sig_vrfy,
    signed_bb84,
    signing_function,
)


def test_sha256_owf_is_truncated_digest():
    f = sha256_owf(16)
    w = 0xBEEF
    assert f(w) == int.from_bytes(hashlib.sha256(b"\xbe\xef").digest()[:2], "big")
    with pytest.raises(ValueError):
        f(1 << 16)


def test_planted_problem_round_trip():
    problem = owf_planted(sha256_owf(32))
    inst, wit = planted_sample(problem, Rng(1))
    assert planted_check(problem, inst, wit)
    assert not planted_check(problem, inst, wit ^ 1)
    assert problem.solve(inst) is None
    assert owf_planted(identity_owf(8)).solve(17) == 17


def test_unknown_backend_lists_valid_ones():
    with pytest.raises(ValueError, match="sha256"):
        make_backend("md5", 8)


@pytest.mark.parametrize("backend", ["sha256", "identity", "planted-sha256"])
def test_sign_then_verify(backend):
    params = SigParams.create(8, 16, backend)
    rng = Rng(backend.encode().hex())
    for _ in range(20):
        keys = sig_gen(params, rng)
        m = Bits(rng.bits(8), 8)
        sigma = sig_sign(keys.sigk, m)
        assert sig_vrfy(keys.vk, m, sigma)
        assert message_for_signature(keys.vk, sigma) == m


def test_flipped_message_rejected_over_many_keys():
    params = SigParams.create(8, 32, "sha256")
    rng = Rng(2)
    for _ in range(1000):
        keys = sig_gen(params, rng)
        m = Bits(rng.bits(8), 8)
        sigma = sig_sign(keys.sigk, m)
        assert not sig_vrfy(keys.vk, m.flip(1 + rng.below(8)), sigma)


def test_vrfy_rejects_wrong_shape():
    params = SigParams.create(4, 8)
    keys = sig_gen(params, Rng(3))
    with pytest.raises(ValueError):
        sig_vrfy(keys.vk, "0000", Signature((0, 0, 0), 8))


def test_key_serialization_round_trip():
    params = SigParams.create(5, 24, "sha256")
    keys = sig_gen(params, Rng(4))
    again = SigKeyPair.from_json(keys.to_json())
    assert again == keys
    assert VerificationKey.from_json(keys.vk.to_json()) == keys.vk
    assert SigningKey.from_hex(params, keys.sigk.hex()) == keys.sigk


@pytest.mark.parametrize("text", ["{", '{"params": {"ell": 1}}', '{"params": {"ell": 2, "lambda_f": 8, "backend": "nope"}, "vk": ""}'])
def test_bad_key_files(text):
    with pytest.raises(FormatError):
        SigKeyPair.from_json(text)


@settings(max_examples=40)
@given(st.integers(1, 20), st.integers(1, 24), st.integers(0, 2**32))
def test_signing_function_agrees_with_sign(ell, lambda_f, seed):
    params = SigParams.create(ell, lambda_f, "sha256")
    rng = Rng(seed)
    keys = sig_gen(params, rng)
    sign = signing_function(keys.sigk)
    for _ in range(5):
        m = Bits(rng.bits(ell), ell)
        assert sign(m.value) == sig_sign(keys.sigk, m).packed()


@settings(max_examples=30)
@given(st.integers(1, 6), st.integers(0, 2**32))
def test_coherent_sign_structure_and_inverse(ell, seed):
    rng = Rng(seed)
    params = SigParams.create(ell, 8, "sha256")
    keys = sig_gen(params, rng)
    x, theta = Bits(rng.bits(ell), ell), Bits(rng.bits(ell), ell)
    psi = signed_bb84(keys.sigk, x, theta)
    for label in psi.amps:
        m = psi.layout.extract(label, MSG)
        assert psi.layout.extract(label, SIG) == sig_sign(keys.sigk, Bits(m, ell)).packed()
    unsigned = coherent_unsign(keys.sigk, psi)
    assert unsigned.register_values(SIG) == {0}
    assert coherent_sign(keys.sigk, unsigned) == psi


def test_signed_branches_carry_computational_keys():
    params = SigParams.create(4, 8, "sha256")
    keys = sig_gen(params, Rng(5))
    x, theta = Bits.from_str("1010"), Bits.from_str("0110")
    psi = signed_bb84(keys.sigk, x, theta)
    for label, p, _ in measurement_branches(psi, list(range(1, psi.width + 1))):
        sigma = Signature.from_packed(label.value & ((1 << params.sig_width) - 1), 8, 4)
        for i in (1, 4):
            assert sigma.w[i - 1] == keys.sigk.u[i - 1][x[i]]
