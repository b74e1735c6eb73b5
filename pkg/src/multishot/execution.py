"""Run results and worker plumbing shared by the three executors."""
from __future__ import annotations

import hashlib
import json
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_MEMORY_LIMIT = 1 << 30
MEMORY_ENV = "MULTISHOT_MEMORY_LIMIT"


class CapacityError(MemoryError):
    pass


def memory_limit() -> int:
    """Byte budget for amplitude storage (overridable via ``MULTISHOT_MEMORY_LIMIT``)."""
    raw = os.environ.get(MEMORY_ENV)
    return int(float(raw)) if raw else DEFAULT_MEMORY_LIMIT


@dataclass
class RunResult:
    counts: dict
    timing: float = 0.0
    dispatch_count: int = 0
    state_count: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def shots(self) -> int:
        return sum(self.counts.values())

    @property
    def checksum(self) -> str:
        return counts_checksum(self.counts)


def merge_counts(partials: Iterable[dict]) -> dict:
    total = Counter()
    for p in partials:
        total.update(p)
    return dict(sorted(total.items()))


def counts_checksum(counts: dict) -> str:
    blob = json.dumps(sorted(counts.items()), separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def counts_from_keys(keys: Sequence[int], width: int, has_measure: bool) -> dict:
    """Histogram of classical-register values as bitstrings (clbit 0 rightmost)."""
    vals, cnt = np.unique(np.asarray(keys, dtype=np.uint64), return_counts=True)
    if not has_measure:
        return {"": int(cnt.sum())} if len(cnt) else {}
    return {format(int(v), f"0{width}b"): int(c) for v, c in zip(vals, cnt)}


def write_bits(clreg, clbits: Sequence[int], outcome):
    """Write outcome bits (bit j -> ``clbits[j]``) into ``clreg``; works on ints and uint64 arrays."""
    if isinstance(clreg, np.ndarray):
        outcome = np.asarray(outcome, dtype=np.uint64)
        for j, c in enumerate(clbits):
            bit = (outcome >> np.uint64(j)) & np.uint64(1)
            clreg = (clreg & ~np.uint64(1 << c)) | (bit << np.uint64(c))
        return clreg
    for j, c in enumerate(clbits):
        clreg = (clreg & ~(1 << c)) | (((int(outcome) >> j) & 1) << c)
    return clreg


def outcome_x_mask(qubits: Sequence[int], outcome: int) -> int:
    """Mask of the qubits measured as 1 (for reset correction)."""
    return sum(1 << q for j, q in enumerate(qubits) if (int(outcome) >> j) & 1)


def partition_shots(shots: int, workers: int) -> list[np.ndarray]:
    """Contiguous, near-equal shot ranges, one per worker (empty ranges dropped)."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return [c for c in np.array_split(np.arange(shots, dtype=np.int64), workers) if len(c)]


def run_partitioned(fn: Callable, chunks: list, workers: int) -> list:
    """Apply ``fn`` to each chunk, in a thread pool when ``workers > 1``; order preserved."""
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def check_clbits(program) -> None:
    if program.num_clbits > 64:
        raise CapacityError("at most 64 classical bits are supported")
