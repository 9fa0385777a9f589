import math

import pytest

from pkepvd.adversaries import (
    BitFlipForger,
    CoherentForger,
    HadamardEverything,
    HonestDeleter,
    NoMeasureGuesser,
    PartialMeasurement,
    SigOnlyMeasurer,
    default_family,
    make_adversary,
)
from pkepvd.experiments import (
    DeletionTranscript,
    cd_report,
    everlasting_oracle,
    mask_posterior,
    mismatch_at_computational,
    otu_report,
    run_cd_game,
    run_otu_game,
)
from pkepvd.pvd import PvdParams, parity
from pkepvd.qsim import Bits
from pkepvd.rng import Rng
from pkepvd.signature import SigParams


def test_mismatch_only_counts_computational_positions():
    theta = Bits.from_str("0101")
    assert not mismatch_at_computational(Bits.from_str("0000"), Bits.from_str("0101"), theta)
    assert mismatch_at_computational(Bits.from_str("0000"), Bits.from_str("1000"), theta)


def test_make_adversary():
    assert make_adversary("partial2").kept == (1, 2)
    with pytest.raises(ValueError, match="honest"):
        make_adversary("oracle")
    with pytest.raises(ValueError):
        PartialMeasurement((1, 2, 3))


# --- sampled games ----------------------------------------------------------


def test_otu_honest_never_wins():
    r = otu_report(SigParams.create(8, 32), HonestDeleter(), 300, Rng(1))
    assert r["win_rate"] == 0.0 and r["verify_rate"] == 1.0


def test_otu_bitflip_controls():
    # with an invertible backend the forger loses only when theta = 1^lambda
    params, rng = SigParams.create(8, 8, "identity"), Rng(2)
    for t in range(200):
        out = run_otu_game(params, BitFlipForger(), rng.spawn(t))
        assert out.verified and out.win == (out.theta != "1" * 8)
    hashed = otu_report(SigParams.create(8, 32), BitFlipForger(), 500, Rng(3))
    assert hashed["win_rate"] == 0.0


def test_otu_outcome_fields():
    out = run_otu_game(SigParams.create(4, 8, "identity"), BitFlipForger(), Rng(4))
    assert out.win == (out.mismatch and out.verified)


def test_cd_honest_accepts_with_empty_residual():
    params = PvdParams.create(8, 32)
    for t in range(50):
        out = run_cd_game(params, HonestDeleter(), t & 1, Rng(t))
        assert out.accepted and not out.forge
        assert out.residual is None and out.output == (None, ())


def test_cd_guesser_never_accepts():
    r = cd_report(PvdParams.create(8, 32), NoMeasureGuesser(), 500, Rng(5))
    assert r["acceptance_rate"] == 0.0


def test_cd_rejects_bad_b():
    with pytest.raises(ValueError):
        run_cd_game(PvdParams.create(2, 8), HonestDeleter(), 2, Rng(0))


@pytest.mark.parametrize("adv", [HonestDeleter(), SigOnlyMeasurer(), PartialMeasurement((1, 2)), HadamardEverything()])
def test_accept_implies_match(adv):
    params = PvdParams.create(4, 32)
    for t in range(300):
        out = run_cd_game(params, adv, 0, Rng(1000 + t))
        if out.accepted:
            assert not mismatch_at_computational(out.x, out.cert.x, out.theta)


@pytest.mark.parametrize("adv", [HadamardEverything(), SigOnlyMeasurer()])
def test_oracle_soundness(adv):
    """Sampled acceptance agrees with the exact oracle within 5 sigma."""
    lam, N = 4, 4000
    exact = everlasting_oracle(lam, [adv], Rng(6), lambda_f=32)[0].acceptance
    emp = cd_report(PvdParams.create(lam, 32), adv, N, Rng(7))["acceptance_rate"]
    assert abs(emp - exact) <= 5 * math.sqrt(exact * (1 - exact) / N) + 1e-12


# --- exact oracle -----------------------------------------------------------------


@pytest.mark.parametrize("lam", [1, 2, 3, 4])
def test_honest_td_is_exactly_the_degenerate_theta_mass(lam):
    (r,) = everlasting_oracle(lam, [HonestDeleter()], Rng(lam), lambda_f=32)
    assert r.acceptance == pytest.approx(1.0, abs=1e-12)
    assert r.forge_rate == 0.0
    assert r.degenerate_accept_mass == pytest.approx(2.0**-lam, abs=1e-12)
    assert r.trace_distance == pytest.approx(2.0**-lam, abs=1e-9)
    assert r.trace_distance_nondegenerate <= 1e-9


def test_hadamard_acceptance_envelope_and_conditioned_td():
    lam = 4
    (r,) = everlasting_oracle(lam, [HadamardEverything()], Rng(8), lambda_f=32)
    assert r.acceptance == pytest.approx(2.0**-lam, abs=1e-12)
    assert r.acceptance <= 2.0 ** -(lam / 2)
    assert r.trace_distance_nondegenerate <= 1e-9
    # every remaining bit of distance sits on theta = 0^lambda
    assert r.trace_distance_conditioned == pytest.approx(r.degenerate_accept_mass / r.acceptance, abs=1e-9)


@pytest.mark.parametrize("kept", [(1,), (1, 2)])
def test_partial_measurement_has_no_parity_information_off_degenerate_theta(kept):
    (r,) = everlasting_oracle(4, [PartialMeasurement(kept)], Rng(9), lambda_f=32)
    assert r.forge_rate == 0.0
    assert r.trace_distance_nondegenerate <= 1e-9


def test_family_forge_rate_zero_with_hash_backend():
    for r in everlasting_oracle(3, default_family(3), Rng(10), lambda_f=32):
        assert r.forge_rate == 0.0, r.adversary
        assert r.trace_distance_nondegenerate <= 1e-9, r.adversary


def test_identity_backend_negative_controls():
    coherent, bitflip = everlasting_oracle(3, [CoherentForger(), BitFlipForger()], Rng(11), lambda_f=8, backend="identity")
    assert coherent.trace_distance_nondegenerate > 0.1
    assert bitflip.forge_rate > 0.5


def test_oracle_lambda_bounds():
    with pytest.raises(ValueError):
        everlasting_oracle(7, [HonestDeleter()], Rng(0))
    with pytest.raises(ValueError):
        everlasting_oracle(0, [HonestDeleter()], Rng(0))


def test_real_base_matches_ideal_base_for_honest():
    ideal, real = (
        everlasting_oracle(2, [HonestDeleter()], Rng(12), lambda_f=16, idealize_base=flag)[0] for flag in (True, False)
    )
    assert real.trace_distance == pytest.approx(ideal.trace_distance, abs=1e-12)
    assert real.base == "ske" and ideal.base == "ideal"


# --- mask posterior ------------------------------------------------------------------


def _honest_transcript(lam, seed):
    out = run_cd_game(PvdParams.create(lam, 16), HonestDeleter(), 0, Rng(seed))
    return out.transcript


@pytest.mark.parametrize("lam", [1, 2, 3, 4])
def test_posterior_half_for_honest_nondegenerate(lam):
    seen = 0
    for seed in range(40):
        tr = _honest_transcript(lam, seed)
        if tr.theta.value:
            seen += 1
            assert abs(mask_posterior(lam, tr) - 0.5) <= 1e-12
    assert seen


def test_posterior_degenerate_theta_is_zero():
    tr = DeletionTranscript(1, Bits.zeros(1), "c", Bits.from_str("1"), True)
    assert mask_posterior(1, tr) == 0.0


def test_posterior_with_hidden_theta():
    lam = 3
    tr = DeletionTranscript(lam, None, "ccc", Bits.from_str("101"), True)
    assert mask_posterior(lam, tr) == pytest.approx((1 - 2.0**-lam) / 2, abs=1e-12)


def test_posterior_after_decryption_is_decided():
    lam = 4
    x, theta = Bits.from_str("1101"), Bits.from_str("0110")
    basis = "".join("h" if theta[i] else "-" for i in range(1, lam + 1))
    tr = DeletionTranscript(lam, theta, basis, x, True)
    assert mask_posterior(lam, tr) == float(parity(x, theta))


def test_posterior_errors():
    with pytest.raises(ValueError):
        mask_posterior(2, DeletionTranscript(2, Bits.zeros(2), "cc", Bits.zeros(2), False))
    with pytest.raises(ValueError):
        mask_posterior(2, DeletionTranscript(2, Bits.zeros(2), "cx", Bits.zeros(2), True))
    with pytest.raises(ValueError):
        mask_posterior(3, DeletionTranscript(2, Bits.zeros(2), "cc", Bits.zeros(2), True))
