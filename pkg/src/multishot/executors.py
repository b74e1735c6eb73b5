"""Strategy lookup shared by the CLI and the experiment scripts."""
from __future__ import annotations

from .batch import run_batch
from .branch import run_branch
from .execution import RunResult
from .naive import run_naive
from .noise import NoisyCircuit

EXECUTORS = {"naive": run_naive, "batch": run_batch, "branch": run_branch}


def run(program: NoisyCircuit, shots: int, strategy: str = "batch", **options) -> RunResult:
    """Run ``program`` with the named strategy; extra options go to the executor."""
    try:
        fn = EXECUTORS[strategy]
    except KeyError:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {sorted(EXECUTORS)}") from None
    return fn(program, shots, **options)
