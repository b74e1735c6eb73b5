import numpy as np
import pytest
from hypothesis import given, strategies as st

from multishot.batch import BatchState, run_batch, shot_index
from multishot.circuit import Condition, GateKind, gate_matrix, measure_all, qft_circuit
from multishot.execution import CapacityError
from multishot.naive import run_naive, simulate_shot
from multishot.noise import (
    KrausError,
    NoiseModel,
    NoiseRule,
    Op,
    bit_flip_error,
    depolarizing_error,
    depolarizing_model,
    instrument,
    pauli_as_kraus,
)

from programs import AMPLITUDE_DAMPING, circuit, gate, measure, noise_models, random_programs


class FixedDraws(BatchState):
    """Batch whose draws are supplied by the test instead of the keyed generator."""

    def __init__(self, n, u):
        super().__init__(n, np.arange(len(u)))
        self.u = np.asarray(u, dtype=float)

    def draws(self, t):
        return self.u


def test_shot_index_examples():
    assert shot_index(5, 3, 1) == 1
    assert [shot_index(k, 3, 3) for k in range(4)] == [0, 1, 2, 3]
    assert list(shot_index(np.arange(4), 2, 1)) == [0, 0, 1, 1]


def test_gate_is_one_dispatch_for_all_segments():
    b = BatchState(2, range(4))
    b.apply_gate(gate_matrix(GateKind.X), [0])
    assert b.dispatch_count == 1
    for s in range(4):
        np.testing.assert_array_equal(b.segment(s), [0, 1, 0, 0])


def test_unsatisfied_condition_still_dispatches():
    b = BatchState(1, range(3))
    b.apply_gate(gate_matrix(GateKind.X), [0], Condition(1, 1))
    assert b.dispatch_count == 1
    for s in range(3):
        np.testing.assert_array_equal(b.segment(s), [1, 0])


def test_segments_are_contiguous_and_disjoint():
    b = BatchState(3, range(5))
    assert b.amps.flags.c_contiguous
    assert b.amps.shape == (5, 8)
    assert b.amps.ctypes.data + 8 * 16 == b.segment(1).ctypes.data


def _pauli_op(error, qubits=(0,), event=0):
    return Op("pauli", tuple(qubits), channel=error, event=event)


def _kraus_op(error, qubits=(0,), event=0):
    return Op("kraus", tuple(qubits), channel=error, event=event)


def test_pauli_rate_zero_no_dispatch():
    b = BatchState(2, range(64))
    b.apply_pauli_noise(_pauli_op(depolarizing_error(0.0, 1)))
    assert b.dispatch_count == 0


def test_bit_flip_pauli_draws():
    b = FixedDraws(1, [0.5, 0.995])
    b.apply_pauli_noise(_pauli_op(bit_flip_error(0.01)))
    assert b.dispatch_count == 1
    np.testing.assert_array_equal(b.segment(0), [1, 0])
    np.testing.assert_array_equal(b.segment(1), [0, 1])
    # the parameter buffer carries the four per-shot values, identity for shot 0
    assert list(b.params["x_mask"]) == [0, 1]
    assert list(b.params["x_max"]) == [-1, 0]
    assert list(b.params["num_y"]) == [0, 0]
    assert list(b.params["z_mask"]) == [0, 0]


def test_identity_kraus_constant_dispatches():
    b = BatchState(1, range(7))
    b.apply_kraus(_kraus_op(KrausError((np.eye(2),))))
    assert b.dispatch_count == 2
    for s in range(7):
        np.testing.assert_array_equal(b.segment(s), [1, 0])


def test_two_matrix_kraus_runs_both_rounds():
    b = FixedDraws(1, [0.5, 0.995])
    b.apply_kraus(_kraus_op(pauli_as_kraus(bit_flip_error(0.01))))
    assert b.dispatch_count == 4
    np.testing.assert_allclose(b.segment(0), [1, 0], atol=1e-15)
    np.testing.assert_allclose(b.segment(1), [0, 1], atol=1e-15)


def test_measure_all_ones():
    b = BatchState(1, range(4))
    b.apply_gate(gate_matrix(GateKind.X), [0])
    b.measure_reset(Op("measure", (0,), (0,), event=0))
    assert list(b.clregs) == [1, 1, 1, 1]
    for s in range(4):
        np.testing.assert_array_equal(b.segment(s), [0, 1])


def test_measure_fixed_draws():
    b = FixedDraws(1, [0.3, 0.7])
    b.apply_gate(gate_matrix(GateKind.H), [0])
    b.measure_reset(Op("measure", (0,), (0,), event=0))
    assert b.dispatch_count == 1 + 2
    np.testing.assert_allclose(b.segment(0), [1, 0], atol=1e-15)
    np.testing.assert_allclose(b.segment(1), [0, 1], atol=1e-15)
    assert list(b.clregs) == [0, 1]


def test_reset_leaves_clregs():
    b = FixedDraws(2, [0.9, 0.1])
    b.apply_gate(gate_matrix(GateKind.H), [1])
    b.measure_reset(Op("reset", (1,), event=0))
    assert list(b.clregs) == [0, 0]
    for s in range(2):
        np.testing.assert_allclose(b.segment(s), [1, 0, 0, 0], atol=1e-15)


def _segment_exactness(program, shots, seed):
    for stop in range(len(program.body) + 1):
        b = BatchState(program.num_qubits, np.arange(shots), seed)
        b.run(program, stop=stop)
        for s in range(shots):
            state, clreg = simulate_shot(program, seed, s, stop=stop)
            np.testing.assert_array_equal(b.segment(s), state)
            assert int(b.clregs[s]) == clreg
            assert abs(np.linalg.norm(b.segment(s)) - 1) < 1e-10


@given(random_programs(max_qubits=4, max_len=10), st.integers(0, 10_000), st.integers(1, 32))
def test_segment_exactness_random_programs(program, seed, shots):
    _segment_exactness(program, shots, seed)


def test_random_two_qubit_circuits_equal_naive():
    rng = np.random.default_rng(0)
    for trial in range(5):
        insts = []
        for _ in range(8):
            kind = [GateKind.H, GateKind.CX, GateKind.P, GateKind.U][rng.integers(4)]
            qs = list(rng.permutation(2)[: 2 if kind is GateKind.CX else 1])
            params = tuple(rng.normal(size=kind.num_params))
            insts.append(gate(kind, *qs, params=params))
        _segment_exactness(instrument(circuit(2, 0, *insts)), 8, trial)


def test_h_layer_depolarizing_equal_naive():
    c = circuit(3, 0, *(gate(GateKind.H, q) for q in range(3)), *(gate(GateKind.H, q) for q in range(3)))
    _segment_exactness(instrument(c, depolarizing_model(0.1)), 16, 4)


def test_amplitude_damping_equal_naive():
    model = NoiseModel((NoiseRule({GateKind.H}, AMPLITUDE_DAMPING),))
    c = circuit(2, 0, gate(GateKind.H, 0), gate(GateKind.H, 1), gate(GateKind.CX, 0, 1), gate(GateKind.H, 0))
    prog = instrument(c, model)
    for seed in range(3):
        b = BatchState(2, np.arange(32), seed)
        b.run(prog)
        for s in range(32):
            np.testing.assert_allclose(b.segment(s), simulate_shot(prog, seed, s)[0], atol=1e-12, rtol=0)


def test_intermediate_measure_and_conditional_equal_naive():
    c = circuit(
        2,
        2,
        gate(GateKind.H, 0),
        gate(GateKind.H, 1),
        measure([0], [0]),
        gate(GateKind.X, 1, cond=Condition(1, 1)),
        measure([1], [1]),
    )
    prog = instrument(c, depolarizing_model(0.05))
    assert run_batch(prog, 64, seed=1).counts == run_naive(prog, 64, seed=1).counts


def test_no_cross_segment_leakage():
    prog = instrument(measure_all(qft_circuit(3)), depolarizing_model(0.2))
    clean = BatchState(3, np.arange(6), 2)
    dirty = BatchState(3, np.arange(6), 2)
    dirty.amps[3] = np.roll(dirty.amps[3], 5)
    clean.run(prog)
    dirty.run(prog)
    for s in (0, 1, 2, 4, 5):
        np.testing.assert_array_equal(clean.segment(s), dirty.segment(s))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_zero_noise_dispatch_count(n):
    prog = instrument(measure_all(qft_circuit(n)))
    gates = len(qft_circuit(n).instructions)
    for shots in (1, 7, 1024):
        assert run_batch(prog, shots).dispatch_count == gates + (1 << n)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_equals_naive_on_noisy_qft(n, seed):
    prog = instrument(measure_all(qft_circuit(n)), depolarizing_model(0.01))
    assert run_batch(prog, 256, seed=seed).counts == run_naive(prog, 256, seed=seed).counts


def test_single_shot():
    prog = instrument(measure_all(qft_circuit(3)), depolarizing_model(0.3))
    assert run_batch(prog, 1, seed=4).counts == run_naive(prog, 1, seed=4).counts


@pytest.mark.parametrize("size", [1, 5, 64])
def test_batch_size_and_workers_invariance(size):
    prog = instrument(measure_all(qft_circuit(4)), dict(noise_models(0.1, 0.1))["kraus"])
    ref = run_naive(prog, 100, seed=3).counts
    for workers in (1, 3):
        assert run_batch(prog, 100, seed=3, workers=workers, max_batch_size=size).counts == ref


def test_capacity_error(monkeypatch):
    prog = instrument(measure_all(qft_circuit(4)))
    monkeypatch.setenv("MULTISHOT_MEMORY_LIMIT", str(16 * 16 * 8))
    run_batch(prog, 100, max_batch_size=8)
    with pytest.raises(CapacityError, match="max_batch_size"):
        run_batch(prog, 100, max_batch_size=9)
    # default batch size fits the limit
    assert run_batch(prog, 100).metadata["max_batch_size"] == 8
