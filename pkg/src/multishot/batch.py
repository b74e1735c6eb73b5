"""Batched multi-shot executor.

All shots of a batch advance in lockstep through the program. Amplitudes live
in one contiguous array, shot ``s`` owning ``amps[s]`` (the flat segment
``[s * 2**n, (s + 1) * 2**n)``). Each batched operation counts as one
dispatch regardless of the number of shots; per-shot behaviour (noise draws,
measurement outcomes, conditions) is resolved through parameter buffers and
masks inside the dispatch.
"""
from __future__ import annotations

import time
from typing import Optional, Sequence

import numpy as np

from .circuit import Condition
from .execution import (
    CapacityError,
    RunResult,
    check_clbits,
    counts_from_keys,
    memory_limit,
    merge_counts,
    partition_shots,
    run_partitioned,
    write_bits,
)
from .noise import KrausError, NoisyCircuit, Op, PauliError
from .rng import uniform
from .statevector import (
    DegenerateMeasurementError,
    apply_matrix,
    apply_pauli_rows,
    collapse_rows,
    expval_matrix,
    probabilities,
    scale_rows,
    select_outcome,
    zero_state,
)


def shot_index(i, n_q: int, n_g: int):
    """Shot owning global iteration ``i`` of a kernel over ``n_g``-qubit gate slots."""
    return np.asarray(i) // (1 << (n_q - n_g)) if np.ndim(i) else int(i) // (1 << (n_q - n_g))


class BatchState:
    """Contiguous multi-shot storage plus per-shot classical registers."""

    def __init__(self, n: int, shot_ids: Sequence[int], seed: int = 0):
        self.n = n
        self.shot_ids = np.asarray(shot_ids, dtype=np.int64)
        self.seed = seed
        self.amps = zero_state(n, len(self.shot_ids))
        self.clregs = np.zeros(len(self.shot_ids), dtype=np.uint64)
        self.dispatch_count = 0
        # last parameter buffer handed to a dispatch (kept for inspection)
        self.params: dict = {}

    @property
    def shots(self) -> int:
        return len(self.shot_ids)

    def segment(self, s: int) -> np.ndarray:
        return self.amps[s]

    def active_mask(self, condition: Optional[Condition]) -> np.ndarray:
        if condition is None:
            return np.ones(self.shots, dtype=bool)
        return (self.clregs & np.uint64(condition.clbit_mask)) == np.uint64(condition.value)

    def draws(self, t: int) -> np.ndarray:
        return uniform(self.seed, self.shot_ids.astype(np.uint64), t)

    # -- batched operations -------------------------------------------------

    def apply_gate(self, m: np.ndarray, qubits: Sequence[int], condition: Optional[Condition] = None) -> None:
        self.dispatch_count += 1
        if condition is None:
            apply_matrix(self.amps, m, qubits)
            return
        rows = np.flatnonzero(self.active_mask(condition))
        if len(rows):
            apply_matrix(self.amps, m, qubits, rows=rows)

    def apply_pauli_noise(self, op: Op) -> None:
        ch: PauliError = op.channel
        active = self.active_mask(op.condition)
        picks = np.searchsorted(ch.cumulative, self.draws(op.event), side="right")
        picks = np.minimum(picks, len(ch.terms) - 1)
        x, z, ny, ident = op.pauli_table
        needs = active & ~ident[picks]
        if not needs.any():
            return
        # identity masks for shots that sampled ID or are masked out
        self.params = {
            "x_mask": np.where(needs, x[picks], 0),
            "z_mask": np.where(needs, z[picks], 0),
            "num_y": np.where(needs, ny[picks], 0),
        }
        self.params["x_max"] = np.array([int(v).bit_length() - 1 for v in self.params["x_mask"]])
        self.dispatch_count += 1
        rows = np.flatnonzero(needs)
        apply_pauli_rows(
            self.amps,
            self.params["x_mask"][rows],
            self.params["z_mask"][rows],
            self.params["num_y"][rows],
            rows=rows,
        )

    def apply_kraus(self, op: Op) -> None:
        kraus: KrausError = op.channel
        u = self.draws(op.event)
        active = np.flatnonzero(self.active_mask(op.condition))
        done = np.ones(self.shots, dtype=bool)
        done[active] = False
        acc = np.zeros(self.shots)
        last_i = np.full(self.shots, -1)
        last_p = np.zeros(self.shots)
        for i, m in enumerate(kraus.matrices):
            self.dispatch_count += 1
            # every active shot is evaluated, resolved or not, so the cost of
            # the loop does not depend on where the draws land
            p_all = expval_matrix(self.amps, m, op.qubits, rows=active) if len(active) else np.zeros(0)
            open_ = ~done[active]
            rows, p = active[open_], p_all[open_]
            acc[rows] += p
            pos = p > 0
            last_i[rows[pos]] = i
            last_p[rows[pos]] = p[pos]
            # pending flag: first crossing of the shot's draw
            pending = rows[u[rows] < acc[rows]]
            self.dispatch_count += 1
            self._multiply_normalized(pending, m, last_p[pending], op.qubits)
            done[pending] = True
        rest = np.flatnonzero(~done)
        if len(rest):
            if np.any(last_i[rest] < 0):
                raise DegenerateMeasurementError("every Kraus matrix annihilates a shot")
            for i in np.unique(last_i[rest]):
                sel = rest[last_i[rest] == i]
                self.dispatch_count += 1
                self._multiply_normalized(sel, kraus.matrices[i], last_p[sel], op.qubits)

    def _multiply_normalized(self, rows: np.ndarray, m: np.ndarray, p: np.ndarray, qubits) -> None:
        if not len(rows):
            return
        if np.any(p <= 0):
            raise DegenerateMeasurementError("selected Kraus matrix has zero probability")
        apply_matrix(self.amps, m, qubits, rows=rows)
        scale_rows(self.amps, p, rows=rows)

    def measure_reset(self, op: Op) -> None:
        qubits = op.qubits
        k = len(qubits)
        rows = np.flatnonzero(self.active_mask(op.condition))
        self.dispatch_count += 1 << k
        if not len(rows):
            return
        probs = probabilities(self.amps, qubits, rows=rows)
        outcomes = select_outcome(probs, self.draws(op.event)[rows])
        chosen = probs[np.arange(len(rows)), outcomes]
        if np.any(chosen <= 0):
            raise DegenerateMeasurementError("measured distribution sums to zero")
        collapse_rows(self.amps, qubits, outcomes, chosen, rows=rows)
        if op.kind == "measure":
            self.clregs[rows] = write_bits(self.clregs[rows], op.clbits, outcomes)
        else:
            xm = np.zeros(len(rows), dtype=np.int64)
            for j, q in enumerate(qubits):
                xm |= ((outcomes >> j) & 1) << q
            if np.any(xm):
                apply_pauli_rows(self.amps, xm, 0, 0, rows=rows)

    def sample_terminal(self, program: NoisyCircuit) -> np.ndarray:
        """Draw every shot's terminal outcome from its own segment; returns clreg keys."""
        qubits = program.terminal_qubits
        self.dispatch_count += 1 << len(qubits)
        probs = probabilities(self.amps, qubits)
        outcomes = select_outcome(probs, self.draws(program.sampling_event))
        return write_bits(self.clregs.copy(), program.terminal_clbits, outcomes)

    def run(self, program: NoisyCircuit, stop: Optional[int] = None) -> None:
        body = program.body if stop is None else program.body[:stop]
        for op in body:
            kind = op.kind
            if kind == "gate":
                self.apply_gate(op.matrix, op.qubits, op.condition)
            elif kind == "pauli":
                self.apply_pauli_noise(op)
            elif kind == "kraus":
                self.apply_kraus(op)
            elif kind in ("measure", "reset"):
                self.measure_reset(op)

    def final_keys(self, program: NoisyCircuit) -> np.ndarray:
        if program.terminal_sampling:
            return self.sample_terminal(program)
        return self.clregs


def default_batch_size(n: int) -> int:
    return max(1, memory_limit() // ((1 << n) * 16))


def run_batch(
    program: NoisyCircuit,
    shots: int,
    seed: int = 0,
    workers: int = 1,
    max_batch_size: Optional[int] = None,
    memory_budget: Optional[int] = None,
    **_,
) -> RunResult:
    check_clbits(program)
    n = program.num_qubits
    limit = memory_budget or memory_limit()
    if max_batch_size is None:
        max_batch_size = max(1, limit // ((1 << n) * 16))
    if max_batch_size < 1:
        raise ValueError("max_batch_size must be >= 1")
    need = min(max_batch_size, shots) * (1 << n) * 16
    if need > limit:
        raise CapacityError(
            f"batch of {min(max_batch_size, shots)} shots x {n} qubits needs {need} bytes "
            f"(limit {limit}); use max_batch_size <= {limit // ((1 << n) * 16)}"
        )
    t0 = time.perf_counter()

    def work(chunk):
        counts, dispatches = [], 0
        for start in range(0, len(chunk), max_batch_size):
            b = BatchState(n, chunk[start : start + max_batch_size], seed)
            b.run(program)
            counts.append(counts_from_keys(b.final_keys(program), program.num_clbits, program.has_measure))
            dispatches += b.dispatch_count
        return merge_counts(counts), dispatches

    parts = run_partitioned(work, partition_shots(shots, workers), workers)
    return RunResult(
        counts=merge_counts(c for c, _ in parts),
        timing=time.perf_counter() - t0,
        dispatch_count=sum(d for _, d in parts),
        metadata={
            "strategy": "batch",
            "shots": shots,
            "seed": seed,
            "workers": workers,
            "max_batch_size": max_batch_size,
        },
    )
