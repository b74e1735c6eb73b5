import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multishot.circuit import GateKind, gate_matrix, qft_circuit
from multishot.noise import PauliString, pauli_to_masks
from multishot.statevector import (
    DegenerateMeasurementError,
    PauliMasks,
    _pauli_rows,
    _times_minus_i_pow,
    apply_matrix,
    apply_pauli_fused,
    expval_matrix,
    probabilities,
    project_and_renormalize,
    sample_counts,
    select_outcome,
    zero_state,
)

from oracles import H, X, Y, Z, embed, pauli_string_operator, random_state, random_unitary

RNG = np.random.default_rng(2024)


def ket(n, idx):
    v = np.zeros(1 << n, dtype=complex)
    v[idx] = 1
    return v


def bell():
    return (ket(2, 0) + ket(2, 3)) / np.sqrt(2)


def test_x_flips():
    s = ket(1, 0)
    apply_matrix(s, gate_matrix(GateKind.X), [0])
    np.testing.assert_array_equal(s, ket(1, 1))


def test_h_superposes():
    s = ket(1, 0)
    apply_matrix(s, gate_matrix(GateKind.H), [0])
    np.testing.assert_allclose(s, [2**-0.5, 2**-0.5], atol=1e-15)


def test_cx_builds_bell():
    s = (ket(2, 0) + ket(2, 1)) / np.sqrt(2)
    apply_matrix(s, gate_matrix(GateKind.CX), [0, 1])
    np.testing.assert_allclose(s, bell(), atol=1e-15)


def test_apply_matrix_shape_error():
    with pytest.raises(ValueError):
        apply_matrix(ket(2, 0), np.eye(4), [0])
    with pytest.raises(ValueError):
        apply_matrix(ket(2, 0), np.eye(2), [2])


@pytest.mark.parametrize("n,k", [(1, 1), (3, 1), (3, 2), (4, 3), (5, 2)])
def test_apply_matrix_matches_dense(n, k):
    for _ in range(5):
        qubits = list(RNG.permutation(n)[:k])
        m = random_unitary(RNG, 1 << k)
        psi = random_state(RNG, n)
        expect = embed(m, qubits, n) @ psi
        apply_matrix(psi, m, qubits)
        np.testing.assert_allclose(psi, expect, atol=1e-12)
        assert abs(np.linalg.norm(psi) - 1) < 1e-10


def test_batched_rows_match_single_rows_bitwise():
    n = 4
    m = random_unitary(RNG, 4)
    states = np.stack([random_state(RNG, n) for _ in range(6)])
    single = states.copy()
    apply_matrix(states, m, [2, 0], rows=[1, 3, 4])
    for r in range(6):
        if r in (1, 3, 4):
            apply_matrix(single[r], m, [2, 0])
    np.testing.assert_array_equal(states, single)


# -- fused Pauli ---------------------------------------------------------------


def test_phase_table():
    a = complex(1, 0)
    assert [_times_minus_i_pow(a, k) for k in range(4)] == [1, -1j, -1, 1j]


def test_y_on_single_qubit():
    a, b = 0.6, 0.8j
    s = np.array([a, b], dtype=complex)
    apply_pauli_fused(s, PauliMasks(1, 1, 1))
    np.testing.assert_allclose(s, [-1j * b, 1j * a], atol=1e-15)
    np.testing.assert_allclose(s, Y @ np.array([a, b]), atol=1e-15)


def test_z_only_phase():
    s = np.array([0.6, 0.8], dtype=complex)
    apply_pauli_fused(s, PauliMasks(0, 1, 0))
    np.testing.assert_array_equal(s, [0.6, -0.8])


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fused_pauli_all_strings(n):
    for letters in itertools.product("IXYZ", repeat=n):
        masks = pauli_to_masks(PauliString("".join(letters)))
        psi = random_state(RNG, n)
        expect = pauli_string_operator(letters, range(n), n) @ psi
        apply_pauli_fused(psi, masks)
        np.testing.assert_allclose(psi, expect, atol=1e-12, rtol=0)


@given(n=st.integers(1, 10), x=st.integers(1, 2**10 - 1))
def test_pair_enumeration_covers_every_index(n, x):
    x &= (1 << n) - 1
    if not x:
        x = 1
    # amplitude j holds j, so after the swap every index appears exactly once
    psi = np.arange(1 << n, dtype=np.complex128).reshape(1, -1)
    _pauli_rows(psi, np.zeros(1, np.int64), np.array([x]), np.zeros(1, np.int64), np.zeros(1, np.int64))
    got = psi.real.astype(int)[0]
    np.testing.assert_array_equal(np.sort(got), np.arange(1 << n))
    np.testing.assert_array_equal(got, np.arange(1 << n) ^ x)


def test_fused_rejects_oversized_masks():
    with pytest.raises(ValueError):
        apply_pauli_fused(ket(2, 0), PauliMasks(4, 0, 0))


# -- expectation values and probabilities ---------------------------------------


def test_expval_identity():
    assert expval_matrix(random_state(RNG, 3), np.eye(2), [1]) == pytest.approx(1.0, abs=1e-12)


def test_expval_projector_on_plus():
    s = np.array([1, 1], dtype=complex) / np.sqrt(2)
    assert expval_matrix(s, np.diag([1, 0]), [0]) == pytest.approx(0.5, abs=1e-15)


def test_expval_scaled_x():
    for _ in range(5):
        s = random_state(RNG, 3)
        assert expval_matrix(s, np.sqrt(0.01) * X, [2]) == pytest.approx(0.01, abs=1e-14)


def test_expval_equals_norm_after_apply():
    for _ in range(10):
        n = 4
        m = RNG.normal(size=(4, 4)) + 1j * RNG.normal(size=(4, 4))
        s = random_state(RNG, n)
        c = s.copy()
        apply_matrix(c, m, [3, 1])
        assert expval_matrix(s, m, [3, 1]) == pytest.approx(np.vdot(c, c).real, abs=1e-12)


def test_probabilities_examples():
    np.testing.assert_array_equal(probabilities(ket(1, 1), [0]), [0.0, 1.0])
    np.testing.assert_allclose(probabilities(bell(), [0]), [0.5, 0.5], atol=1e-15)
    psi = zero_state(3)[0]
    for inst in qft_circuit(3).instructions:
        apply_matrix(psi, gate_matrix(inst.kind, inst.params), inst.qubits)
    np.testing.assert_allclose(probabilities(psi, [0, 1, 2]), np.full(8, 0.125), atol=1e-12)


@given(st.integers(1, 5), st.data())
def test_probabilities_sum_to_one(n, data):
    qubits = data.draw(st.permutations(range(n)))[: data.draw(st.integers(1, n))]
    p = probabilities(random_state(np.random.default_rng(n), n), qubits)
    assert p.shape == (1 << len(qubits),)
    assert abs(p.sum() - 1) < 1e-10


def test_probabilities_bit_order():
    # qubits[0] is the least significant bit of the outcome
    p = probabilities(ket(3, 0b100), [2, 0])
    assert np.argmax(p) == 1


# -- collapse -------------------------------------------------------------------


def test_collapse_examples():
    s = np.array([1, 1], dtype=complex) / np.sqrt(2)
    project_and_renormalize(s, [0], 1, 0.5)
    np.testing.assert_allclose(s, [0, 1], atol=1e-15)
    b = bell()
    project_and_renormalize(b, [0], 0, 0.5)
    np.testing.assert_allclose(b, ket(2, 0), atol=1e-15)
    s = np.sqrt(0.2) * ket(2, 0) + np.sqrt(0.8) * ket(2, 3)
    project_and_renormalize(s, [0, 1], 0b11, 0.8)
    np.testing.assert_allclose(s, ket(2, 3), atol=1e-12)
    assert abs(np.linalg.norm(s) - 1) < 1e-12


def test_collapse_degenerate():
    with pytest.raises(DegenerateMeasurementError):
        project_and_renormalize(ket(1, 0), [0], 1, 0.0)


# -- sampling ---------------------------------------------------------------------


def test_select_outcome_strict():
    p = np.array([0.5, 0.0, 0.5])
    assert list(select_outcome(p, [0.0, 0.4999, 0.5, 0.99])) == [0, 0, 2, 2]


def test_select_outcome_slack_falls_back_to_last_positive():
    p = np.array([0.3, 0.7 - 1e-12, 0.0])
    assert select_outcome(p, 0.9999999999999)[0] == 1


def test_sample_counts_deterministic():
    assert sample_counts(ket(1, 1), [0], 100, seed=3, event=0) == {"1": 100}


def test_sample_counts_bell():
    counts = sample_counts(bell(), [0, 1], 100_000, seed=11, event=0)
    assert set(counts) == {"00", "11"}
    bound = 3 * np.sqrt(0.25 * 100_000)
    for key in ("00", "11"):
        assert abs(counts[key] - 50_000) <= bound


def test_zero_amplitudes_never_sampled():
    s = np.array([0.6, 0, 0, 0.8], dtype=complex)
    counts = sample_counts(s, [0, 1], 20_000, seed=1, event=4)
    assert set(counts) == {"00", "11"}
