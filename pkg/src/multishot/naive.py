"""Per-shot reference executor: every shot owns a state and runs the whole program."""
from __future__ import annotations

import time
from typing import Optional, Sequence

import numpy as np

from .execution import (
    CapacityError,
    RunResult,
    check_clbits,
    counts_from_keys,
    merge_counts,
    outcome_x_mask,
    partition_shots,
    run_partitioned,
    write_bits,
)
from .noise import KrausError, NoisyCircuit, Op
from .rng import DrawTable, uniform
from .statevector import (
    _ROW0,
    _apply_matrix_rows,
    _pauli_rows,
    DegenerateMeasurementError,
    PauliMasks,
    apply_matrix,
    apply_pauli_fused,
    kraus_scan,
    probabilities,
    project_and_renormalize,
    scale_rows,
    select_outcome,
)


def apply_kraus_single(state: np.ndarray, kraus: KrausError, qubits: Sequence[int], u: float) -> int:
    """Select a Kraus matrix by cumulative expectation (early exit) and apply it normalized.

    Returns the selected matrix index.
    """
    ps, cum = kraus_scan(state, kraus.stack, qubits, u)
    i = int(np.sum(cum <= u))
    if i < len(cum):
        p = ps[i]
    else:
        # completeness slack: fall back to the last matrix that can occur
        positive = np.flatnonzero(ps > 0)
        if not len(positive):
            raise DegenerateMeasurementError("every Kraus matrix annihilates the state")
        i = int(positive[-1])
        p = ps[i]
    if not p > 0:
        raise DegenerateMeasurementError(f"selected Kraus matrix {i} has zero probability")
    apply_matrix(state, kraus.matrices[i], qubits)
    scale_rows(state, [p])
    return i


def measure_single(state: np.ndarray, qubits: Sequence[int], u: float) -> int:
    """Sample an outcome over ``qubits`` with one draw and collapse onto it."""
    probs = probabilities(state, qubits)
    m = int(select_outcome(probs, u)[0])
    project_and_renormalize(state, qubits, m, probs[m])
    return m


def reset_single(state: np.ndarray, qubits: Sequence[int], u: float) -> int:
    m = measure_single(state, qubits, u)
    x = outcome_x_mask(qubits, m)
    if x:
        apply_pauli_fused(state, PauliMasks(x, 0, 0))
    return m


def step(state: np.ndarray, clreg: int, op: Op, u: float) -> int:
    """Apply one op to a single shot; returns the updated classical register."""
    if op.condition is not None and not op.condition.holds(clreg):
        return clreg
    kind = op.kind
    if kind == "gate":
        _apply_matrix_rows(state.reshape(1, -1), _ROW0, op.matrix, op.qubit_array)
    elif kind == "pauli":
        ch = op.channel
        i = int(np.searchsorted(ch.cumulative, u, side="right"))
        i = min(i, len(ch.terms) - 1)
        x, z, ny, ident = op.pauli_table
        if not ident[i]:
            _pauli_rows(state.reshape(1, -1), _ROW0, x[i : i + 1], z[i : i + 1], ny[i : i + 1])
    elif kind == "kraus":
        apply_kraus_single(state, op.channel, op.qubits, u)
    elif kind == "measure":
        m = measure_single(state, op.qubits, u)
        clreg = write_bits(clreg, op.clbits, m)
    elif kind == "reset":
        reset_single(state, op.qubits, u)
    return clreg


def simulate_shot(program: NoisyCircuit, seed: int, shot: int, stop: Optional[int] = None, draws=None):
    """Run shot ``shot`` through ``program.body[:stop]``; returns ``(state, clreg)``."""
    n = program.num_qubits
    state = np.zeros(1 << n, dtype=np.complex128)
    state[0] = 1.0
    clreg = 0
    if draws is None:
        draws = uniform(seed, shot, np.arange(program.num_events + 1, dtype=np.uint64))
    body = program.body if stop is None else program.body[:stop]
    for op in body:
        clreg = step(state, clreg, op, draws[op.event] if op.event is not None else 0.0)
    return state, clreg


def final_key(program: NoisyCircuit, state: np.ndarray, clreg: int, u_final: float) -> int:
    if program.terminal_sampling:
        probs = probabilities(state, program.terminal_qubits)
        m = int(select_outcome(probs, u_final)[0])
        clreg = write_bits(clreg, program.terminal_clbits, m)
    return clreg


def _run_chunk(program: NoisyCircuit, seed: int, shot_ids: np.ndarray) -> dict:
    table = DrawTable(seed, shot_ids, program.num_events + 1)
    keys = []
    for s in shot_ids:
        draws = table.row(int(s))
        state, clreg = simulate_shot(program, seed, int(s), draws=draws)
        keys.append(final_key(program, state, clreg, draws[program.sampling_event]))
    return counts_from_keys(keys, program.num_clbits, program.has_measure)


def run_naive(
    program: NoisyCircuit,
    shots: int,
    seed: int = 0,
    workers: int = 1,
    memory_budget: Optional[int] = None,
    **_,
) -> RunResult:
    check_clbits(program)
    if memory_budget is not None and memory_budget < (1 << program.num_qubits) * 16 * workers:
        raise CapacityError(f"{memory_budget} bytes cannot hold {workers} {program.num_qubits}-qubit states")
    t0 = time.perf_counter()
    chunks = partition_shots(shots, workers)
    parts = run_partitioned(lambda c: _run_chunk(program, seed, c), chunks, workers)
    return RunResult(
        counts=merge_counts(parts),
        timing=time.perf_counter() - t0,
        metadata={"strategy": "naive", "shots": shots, "seed": seed, "workers": workers},
    )
