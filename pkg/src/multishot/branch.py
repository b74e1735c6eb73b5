"""Shot-branching executor.

A pass starts from one state shared by every unfinished shot. At each
randomness site a node is split by its shots' decisions: the first child keeps
the parent's storage, the others get deep copies. When the children would
exceed the live-state budget, the most populated ones are kept and the shots
of the rest wait for a later pass that restarts from the beginning.
"""
from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

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
from .noise import NoisyCircuit, Op
from .rng import DrawTable
from .statevector import (
    _ROW0,
    DegenerateMeasurementError,
    PauliMasks,
    _apply_matrix_rows,
    _pauli_rows,
    _scale_rows,
    apply_pauli_fused,
    kraus_scan,
    probabilities,
    project_and_renormalize,
    select_outcome,
    zero_state,
)


@dataclass
class BranchNode:
    state: np.ndarray
    shot_ids: np.ndarray
    clreg: int = 0


@dataclass
class BranchStats:
    peak_states: int = 0
    passes: int = 0
    leaf_sizes: Counter = field(default_factory=Counter)
    branch_events: int = 0


@dataclass
class _Child:
    node_pos: int
    decision: int
    shot_ids: np.ndarray
    apply: object  # callable(state, clreg) -> clreg


def _kraus_decisions(node: BranchNode, op: Op, u: np.ndarray):
    """Matrix index per shot, scanning expectations once on the shared state.

    Expectations are evaluated lazily up to the largest draw, which yields the
    same choices as a per-shot early-exit scan.
    """
    ps, cum = kraus_scan(node.state, op.channel.stack, op.qubits, u.max())
    idx = np.sum(cum[None, :] <= u[:, None], axis=1)
    if np.any(idx >= len(cum)):
        positive = np.flatnonzero(ps > 0)
        if not len(positive):
            raise DegenerateMeasurementError("every Kraus matrix annihilates the state")
        idx = np.where(idx >= len(cum), positive[-1], idx)
    return idx, ps


def _branch_children(node: BranchNode, pos: int, op: Op, draws: DrawTable) -> list[_Child]:
    """Group the node's shots by their decision at ``op`` (decision order)."""
    if op.condition is not None and not op.condition.holds(node.clreg):
        return [_Child(pos, 0, node.shot_ids, None)]
    u = draws(node.shot_ids, op.event)
    kind = op.kind
    if kind == "pauli":
        ch = op.channel
        picks = np.minimum(np.searchsorted(ch.cumulative, u, side="right"), len(ch.terms) - 1)
        x, z, ny, ident = op.pauli_table

        def make(i):
            if ident[i]:
                return None
            masks = (x[i : i + 1], z[i : i + 1], ny[i : i + 1])
            return lambda state, clreg: (_pauli_rows(state, _ROW0, *masks), clreg)[1]

    elif kind == "kraus":
        picks, ps = _kraus_decisions(node, op, u)

        def make(i):
            m, p = op.channel.matrices[i], ps[i]

            def apply(state, clreg):
                _apply_matrix_rows(state, _ROW0, m, op.qubit_array)
                _scale_rows(state, _ROW0, np.array([p]))
                return clreg

            return apply

    else:
        probs = probabilities(node.state, op.qubits)[0]
        picks = select_outcome(probs, u)

        def make(i):
            def apply(state, clreg):
                project_and_renormalize(state, op.qubits, i, probs[i])
                if kind == "measure":
                    return write_bits(clreg, op.clbits, i)
                xm = outcome_x_mask(op.qubits, i)
                if xm:
                    apply_pauli_fused(state, PauliMasks(xm, 0, 0))
                return clreg

            return apply

    first = picks[0]
    if np.all(picks == first):
        return [_Child(pos, int(first), node.shot_ids, make(int(first)))]
    out = []
    for d in np.unique(picks):
        out.append(_Child(pos, int(d), node.shot_ids[picks == d], make(int(d))))
    return out


def _run_pass(program: NoisyCircuit, shot_ids: np.ndarray, draws: DrawTable, budget: int, stats: BranchStats):
    """One pass over the program; returns ``(leaves, waiting_shots)``."""
    n = program.num_qubits
    root = zero_state(n)
    nodes = [BranchNode(root, shot_ids, 0)]
    waiting = []
    stats.peak_states = max(stats.peak_states, 1)
    for op in program.body:
        kind = op.kind
        if kind == "barrier":
            continue
        if kind == "gate":
            q = op.qubit_array
            for node in nodes:
                if op.condition is None or op.condition.holds(node.clreg):
                    _apply_matrix_rows(node.state, _ROW0, op.matrix, q)
            continue
        children = []
        for pos, node in enumerate(nodes):
            children.extend(_branch_children(node, pos, op, draws))
        if len(children) > budget:
            order = sorted(range(len(children)), key=lambda j: (-len(children[j].shot_ids), children[j].node_pos, children[j].decision))
            keep = set(order[:budget])
            for j in order[budget:]:
                waiting.append(children[j].shot_ids)
            children = [c for j, c in enumerate(children) if j in keep]
        if len(children) > len(nodes):
            stats.branch_events += 1
        new_nodes = []
        by_parent: dict[int, list[_Child]] = {}
        for c in children:
            by_parent.setdefault(c.node_pos, []).append(c)
        for pos, group in by_parent.items():
            parent = nodes[pos]
            # copy before the first child mutates the shared storage
            states = [parent.state] + [parent.state.copy() for _ in group[1:]]
            for c, st in zip(group, states):
                clreg = parent.clreg
                if c.apply is not None:
                    clreg = c.apply(st, clreg)
                new_nodes.append(BranchNode(st, c.shot_ids, clreg))
        nodes = new_nodes
        stats.peak_states = max(stats.peak_states, len(nodes))
    return nodes, (np.concatenate(waiting) if waiting else np.zeros(0, dtype=np.int64))


def _leaf_keys(program: NoisyCircuit, leaf: BranchNode, draws: DrawTable) -> np.ndarray:
    if not program.terminal_sampling:
        return np.full(len(leaf.shot_ids), leaf.clreg, dtype=np.uint64)
    probs = probabilities(leaf.state, program.terminal_qubits)[0]
    u = draws(leaf.shot_ids, program.sampling_event)
    outcomes = select_outcome(probs, u)
    return write_bits(np.full(len(leaf.shot_ids), leaf.clreg, dtype=np.uint64), program.terminal_clbits, outcomes)


def _run_worker(program: NoisyCircuit, shot_ids: np.ndarray, seed: int, budget: int):
    stats = BranchStats()
    counts = []
    pending = np.sort(np.asarray(shot_ids, dtype=np.int64))
    draws = DrawTable(seed, pending, program.num_events + 1)
    while len(pending):
        stats.passes += 1
        leaves, pending = _run_pass(program, pending, draws, budget, stats)
        pending = np.sort(pending)
        for leaf in leaves:
            stats.leaf_sizes[len(leaf.shot_ids)] += 1
            counts.append(counts_from_keys(_leaf_keys(program, leaf, draws), program.num_clbits, program.has_measure))
    return merge_counts(counts), stats


def run_branch(
    program: NoisyCircuit,
    shots: int,
    seed: int = 0,
    workers: int = 1,
    budget: int = 64,
    memory_budget: Optional[int] = None,
    **_,
) -> RunResult:
    """Shot-branching run. ``state_count`` is the largest per-worker peak of live states.

    ``memory_budget`` (bytes) further caps the live-state budget.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    check_clbits(program)
    if memory_budget is not None:
        fit = memory_budget // ((1 << program.num_qubits) * 16)
        if fit < 1:
            raise CapacityError(f"{memory_budget} bytes cannot hold one {program.num_qubits}-qubit state")
        budget = min(budget, fit)
    t0 = time.perf_counter()
    parts = run_partitioned(lambda c: _run_worker(program, c, seed, budget), partition_shots(shots, workers), workers)
    stats = [s for _, s in parts]
    leaf_sizes = Counter()
    for s in stats:
        leaf_sizes.update(s.leaf_sizes)
    return RunResult(
        counts=merge_counts(c for c, _ in parts),
        timing=time.perf_counter() - t0,
        state_count=max(s.peak_states for s in stats),
        metadata={
            "strategy": "branch",
            "shots": shots,
            "seed": seed,
            "workers": workers,
            "budget": budget,
            "passes": max(s.passes for s in stats),
            "total_passes": sum(s.passes for s in stats),
            "leaf_sizes": dict(sorted(leaf_sizes.items())),
        },
    )


def leaf_statistics(result: RunResult):
    """``(peak states, passes, shots-per-leaf histogram)`` of a branch run."""
    md = result.metadata
    if md.get("strategy") != "branch":
        raise ValueError("leaf statistics exist only for branch runs")
    return result.state_count, md["passes"], md["leaf_sizes"]
