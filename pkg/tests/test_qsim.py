"""Sparse simulator checked against a dense numpy reference."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pkepvd import qsim
from pkepvd.errors import DensityCapExceeded, SupportCapExceeded
from pkepvd.qsim import (
    Bits,
    DensityMatrix,
    RegisterLayout,
    SparseState,
    append_classical_function,
    append_register,
    apply_h,
    apply_x,
    basis_state,
    drop_register,
    hadamard_branches,
    measure_computational,
    measure_hadamard,
    measurement_branches,
    outcome_probabilities,
    prepare_bb84,
    reduced_block,
    to_density_matrix,
    trace_distance,
)
from pkepvd.rng import Rng

H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
X = np.array([[0, 1], [1, 0]])
I2 = np.eye(2)


def dense(state: SparseState) -> np.ndarray:
    v = np.zeros(1 << state.width, dtype=complex)
    for label, a in state.amps.items():
        v[label] = a
    return v


def gate_on(n: int, qubit: int, g: np.ndarray) -> np.ndarray:
    m = np.eye(1)
    for q in range(1, n + 1):
        m = np.kron(m, g if q == qubit else I2)
    return m


def from_dense(v: np.ndarray, n: int) -> SparseState:
    return SparseState(RegisterLayout.of(("A", n)), {i: complex(a) for i, a in enumerate(v) if abs(a) >= qsim.PRUNE})


@st.composite
def random_states(draw, max_qubits=4):
    n = draw(st.integers(1, max_qubits))
    seed = draw(st.integers(0, 2**32 - 1))
    g = np.random.default_rng(seed)
    v = g.normal(size=1 << n) + 1j * g.normal(size=1 << n)
    v /= np.linalg.norm(v)
    return n, from_dense(v, n)


bitstrings = st.integers(1, 8).flatmap(
    lambda n: st.tuples(st.integers(0, 2**n - 1), st.integers(0, 2**n - 1), st.just(n))
)


# --- Bits and layouts -------------------------------------------------------


def test_bits_indexing_is_msb_first():
    b = Bits.from_str("1011")
    assert (b[1], b[2], b[3], b[4]) == (1, 0, 1, 1)
    assert b.value == 0b1011 and str(b) == "1011"
    assert b.ones() == [1, 3, 4]
    assert b.flip(2) == Bits.from_str("1111")


def test_bits_rejects_overflow():
    with pytest.raises(ValueError):
        Bits(4, 2)


def test_layout_offsets():
    lay = RegisterLayout.of(("MSG", 3), ("SIG", 5))
    assert lay.width == 8
    assert lay.qubits("SIG") == [4, 5, 6, 7, 8]
    assert lay.extract(0b101_11001, "MSG") == 0b101
    assert lay.extract(0b101_11001, "SIG") == 0b11001


# --- state preparation ------------------------------------------------------


@given(bitstrings)
def test_bb84_matches_dense_kron(args):
    x, theta, n = args
    xb, tb = Bits(x, n), Bits(theta, n)
    ref = np.ones(1)
    for i in range(1, n + 1):
        v = np.eye(2)[xb[i]]
        ref = np.kron(ref, H @ v if tb[i] else v)
    psi = prepare_bb84(xb, tb)
    np.testing.assert_allclose(dense(psi), ref, atol=1e-12)
    assert len(psi) == 2 ** bin(theta).count("1")


def test_bb84_rejects_length_mismatch():
    with pytest.raises(ValueError):
        prepare_bb84("01", "011")


def test_support_cap_enforced():
    with pytest.raises(SupportCapExceeded):
        prepare_bb84("0000", "1111", cap=8)
    qsim.set_caps(support=4)
    with pytest.raises(SupportCapExceeded):
        apply_h(prepare_bb84("000", "110"), 3)


# --- gates --------------------------------------------------------------------


@given(random_states(), st.data())
def test_h_matches_dense(ns, data):
    n, psi = ns
    q = data.draw(st.integers(1, n))
    np.testing.assert_allclose(dense(apply_h(psi, q)), gate_on(n, q, H) @ dense(psi), atol=1e-12)


@given(random_states(), st.data())
def test_x_matches_dense(ns, data):
    n, psi = ns
    q = data.draw(st.integers(1, n))
    np.testing.assert_allclose(dense(apply_x(psi, q)), gate_on(n, q, X) @ dense(psi), atol=1e-15)


@given(bitstrings, st.data())
def test_h_squared_is_identity_exactly_on_bb84_states(args, data):
    x, theta, n = args
    psi = prepare_bb84(Bits(x, n), Bits(theta, n))
    q = data.draw(st.integers(1, n))
    assert apply_h(apply_h(psi, q), q) == psi


@given(random_states())
def test_h_squared_is_identity_to_roundoff(ns):
    n, psi = ns
    out = psi
    for q in range(1, n + 1):
        out = apply_h(apply_h(out, q), q)
    np.testing.assert_allclose(dense(out), dense(psi), atol=1e-15 * n + 1e-15)


@given(random_states())
def test_gates_preserve_norm(ns):
    n, psi = ns
    for q in range(1, n + 1):
        psi = apply_x(apply_h(psi, q), q)
        assert abs(psi.norm2() - 1.0) <= 1e-9


@given(st.integers(1, 5), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_classical_function_is_self_inverse_and_matches_dense(n_src, n_dst, seed):
    g = np.random.default_rng(seed)
    table = [int(g.integers(0, 2**n_dst)) for _ in range(2**n_src)]
    layout = RegisterLayout.of(("S", n_src), ("T", n_dst))
    v = g.normal(size=1 << n_src)
    v /= np.linalg.norm(v)
    psi = append_register(from_dense(v, n_src), "T", n_dst)
    psi = SparseState(layout, psi.amps)
    out = append_classical_function(psi, "S", "T", table.__getitem__)
    for label, a in out.amps.items():
        m, t = label >> n_dst, label & ((1 << n_dst) - 1)
        assert t == table[m] and a == pytest.approx(v[m])
    back = append_classical_function(out, "S", "T", table.__getitem__)
    assert back == psi


def test_classical_function_rejects_wide_output():
    psi = append_register(basis_state(RegisterLayout.of(("S", 1)), 1), "T", 1)
    with pytest.raises(ValueError):
        append_classical_function(psi, "S", "T", lambda m: 2)


def test_append_and_drop_register_round_trip():
    psi = prepare_bb84("101", "011")
    wide = append_register(psi, "T", 4)
    assert wide.register_values("T") == {0}
    assert drop_register(wide, "T") == psi


def test_drop_entangled_register_rejected():
    psi = prepare_bb84("0", "1")
    with pytest.raises(ValueError):
        drop_register(psi, "MSG")


# --- measurement ----------------------------------------------------------------


@given(random_states(), st.data())
def test_branches_match_dense_projectors(ns, data):
    n, psi = ns
    qubits = data.draw(st.lists(st.integers(1, n), min_size=1, max_size=n, unique=True))
    v = dense(psi)
    total = 0.0
    for outcome, p, post in measurement_branches(psi, qubits):
        proj = np.array(
            [
                all(((i >> (n - q)) & 1) == outcome[k + 1] for k, q in enumerate(qubits))
                for i in range(1 << n)
            ],
            dtype=float,
        )
        assert p == pytest.approx(float(np.sum(np.abs(v * proj) ** 2)), abs=1e-12)
        np.testing.assert_allclose(dense(post), v * proj / math.sqrt(p), atol=1e-12)
        assert abs(post.norm2() - 1.0) <= 1e-9
        total += p
    assert total == pytest.approx(1.0, abs=1e-12)


def _tv(counts, probs, n):
    keys = set(counts) | set(probs)
    return 0.5 * sum(abs(counts.get(k, 0) / n - probs.get(k, 0.0)) for k in keys)


def test_born_rule_tv_bound():
    g = np.random.default_rng(11)
    v = g.normal(size=16) + 1j * g.normal(size=16)
    psi = from_dense(v / np.linalg.norm(v), 4)
    probs = outcome_probabilities(psi, [1, 2, 3, 4])
    rng, N = Rng(12), 10_000
    counts: dict[int, int] = {}
    for t in range(N):
        out, _ = measure_computational(psi, [1, 2, 3, 4], rng)
        counts[out.value] = counts.get(out.value, 0) + 1
    assert _tv(counts, probs, N) <= 5 * math.sqrt(len(probs) / N)


def test_single_qubit_fast_path_agrees_with_general_path():
    psi = prepare_bb84("0101", "1110")
    for q in range(1, 5):
        p_general = outcome_probabilities(psi, [q])
        a, b = Rng(q), Rng(q)
        bit, post = measure_computational(psi, [q], a)
        branches = {o.value: (p, s) for o, p, s in measurement_branches(psi, [q])}
        assert bit.value in branches and post == branches[bit.value][1]
        assert set(p_general) == set(branches)


def test_measure_hadamard_recovers_hadamard_encoded_bits():
    rng = Rng(1)
    for x in range(16):
        psi = prepare_bb84(Bits(x, 4), "1111")
        out, _ = measure_hadamard(psi, [1, 2, 3, 4], rng)
        assert out.value == x


def test_hadamard_branches_sum_to_one():
    psi = prepare_bb84("0110", "0101")
    branches = hadamard_branches(psi, [1, 2, 3, 4])
    assert math.fsum(p for _, p, _ in branches) == pytest.approx(1.0, abs=1e-12)


def test_measure_empty_state_rejected():
    with pytest.raises(ValueError):
        measurement_branches(SparseState(RegisterLayout.of(("A", 1)), {}), [1])


# --- density matrices --------------------------------------------------------------


def _random_pure(g, dim):
    v = g.normal(size=dim) + 1j * g.normal(size=dim)
    return v / np.linalg.norm(v)


def test_trace_distance_pure_closed_form():
    g = np.random.default_rng(5)
    for _ in range(100):
        a, b = _random_pure(g, 8), _random_pure(g, 8)
        expected = math.sqrt(max(0.0, 1 - abs(np.vdot(a, b)) ** 2))
        got = trace_distance(DensityMatrix.from_pure(a), DensityMatrix.from_pure(b))
        assert abs(got - expected) <= 1e-9


def test_trace_distance_rejects_non_hermitian_and_shape_mismatch():
    good = DensityMatrix(np.eye(2) / 2)
    with pytest.raises(ValueError):
        trace_distance(good, DensityMatrix(np.array([[0.5, 1.0], [0.0, 0.5]])))
    with pytest.raises(ValueError):
        trace_distance(good, DensityMatrix(np.eye(4) / 4))


@given(random_states(max_qubits=4), st.data())
def test_partial_trace_matches_dense(ns, data):
    n, psi = ns
    keep = data.draw(st.lists(st.integers(1, n), min_size=1, max_size=n, unique=True).map(sorted))
    rho = reduced_block(psi, keep)
    full = np.einsum("i,j->ij", dense(psi), dense(psi).conj()).reshape([2] * (2 * n))
    letters = "abcdefghijklmnop"
    row = [letters[q - 1] for q in range(1, n + 1)]
    col = [letters[n + q - 1] if q in keep else letters[q - 1] for q in range(1, n + 1)]
    out = "".join(letters[q - 1] for q in keep) + "".join(letters[n + q - 1] for q in keep)
    ref = np.einsum("".join(row) + "".join(col) + "->" + out, full).reshape(1 << len(keep), 1 << len(keep))
    np.testing.assert_allclose(rho, ref, atol=1e-12)
    DensityMatrix(rho).validate()


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_td_monotone_under_discard(seed):
    g = np.random.default_rng(seed)
    psi0 = from_dense(_random_pure(g, 16), 4)
    psi1 = from_dense(_random_pure(g, 16), 4)
    full = trace_distance(to_density_matrix([(1.0, psi0)], [1, 2, 3, 4]), to_density_matrix([(1.0, psi1)], [1, 2, 3, 4]))
    for keep in ([1, 2, 3], [2, 4], [3]):
        part = trace_distance(to_density_matrix([(1.0, psi0)], keep), to_density_matrix([(1.0, psi1)], keep))
        assert part <= full + 1e-8


def test_density_cap_enforced():
    psi = basis_state(RegisterLayout.of(("A", 4)))
    with pytest.raises(DensityCapExceeded):
        reduced_block(psi, ["A"], cap=3)


def test_to_density_matrix_rejects_bad_ensembles():
    psi = basis_state(RegisterLayout.of(("A", 1)))
    with pytest.raises(ValueError):
        to_density_matrix([], ["A"])
    with pytest.raises(ValueError):
        to_density_matrix([(0.3, psi)], ["A"])


def test_json_round_trip_and_validation():
    psi = prepare_bb84("1101", "0110")
    assert SparseState.from_json(psi.to_json()) == psi
    with pytest.raises(ValueError):
        SparseState.from_json('{"layout":[{"name":"A","width":1}],"amps":[["0",0.5,0]]}')
