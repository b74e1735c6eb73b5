"""Benchmark harness: QFT + depolarizing noise sweeps written to CSV.

Cells are run one after another. Within one (qubits, noise, error rate) group
every strategy/worker combination must produce the same counts checksum; a
mismatch aborts the sweep.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import logging
import statistics
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .circuit import measure_all, qft_circuit, to_text
from .density import exact_distribution, total_variation
from .execution import CapacityError, RunResult
from .executors import EXECUTORS, run
from .noise import NoisyCircuit, depolarizing_model, instrument

log = logging.getLogger("multishot.bench")

MAX_QUBITS = 24
MAX_TVD_QUBITS = 6
NOISE_KINDS = ("pauli", "kraus", "none")

COLUMNS = [
    "circuit",
    "qubits",
    "shots",
    "noise",
    "error_rate",
    "strategy",
    "workers",
    "seed",
    "budget",
    "max_batch_size",
    "repeats",
    "wall_seconds",
    "dispatch_count",
    "peak_states",
    "passes",
    "noise_sites",
    "tvd",
    "checksum",
    "status",
]

TVD_COLUMNS = ["qubits", "noise", "error_rate", "strategy", "workers", "shots", "seed", "tvd", "status"]


class ConfigError(ValueError):
    pass


class ChecksumMismatch(RuntimeError):
    def __init__(self, message: str, diagnostic: dict):
        super().__init__(message)
        self.diagnostic = diagnostic


@dataclass
class BenchConfig:
    circuit: str = "qft"
    qubits: list = field(default_factory=lambda: [5])
    shots: int = 4000
    noise: list = field(default_factory=lambda: ["pauli"])
    error_rate: list = field(default_factory=lambda: [0.01])
    strategy: list = field(default_factory=lambda: ["naive", "batch", "branch"])
    workers: list = field(default_factory=lambda: [1])
    seed: int = 0
    budget: int = 64
    max_batch_size: Optional[int] = None
    repeats: int = 5
    out: Optional[str] = None

    def validate(self) -> None:
        if self.circuit != "qft":
            raise ConfigError(f"unknown circuit {self.circuit!r}")
        for name in ("qubits", "noise", "error_rate", "strategy", "workers"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        for n in self.qubits:
            if not 1 <= n <= MAX_QUBITS:
                raise ConfigError(f"qubits must lie in 1..{MAX_QUBITS}, got {n}")
        for kind in self.noise:
            if kind not in NOISE_KINDS:
                raise ConfigError(f"unknown noise {kind!r}")
        for p in self.error_rate:
            if not 0 <= p <= 1:
                raise ConfigError(f"error rate {p} outside [0, 1]")
        for s in self.strategy:
            if s not in EXECUTORS:
                raise ConfigError(f"unknown strategy {s!r}")
        if any(w < 1 for w in self.workers):
            raise ConfigError("workers must be >= 1")
        if self.shots < 1 or self.repeats < 1 or self.budget < 1:
            raise ConfigError("shots, repeats and budget must be >= 1")
        if self.max_batch_size is not None and self.max_batch_size < 1:
            raise ConfigError("max_batch_size must be >= 1")


def build_program(n: int, noise: str, error_rate: float) -> NoisyCircuit:
    model = None if noise == "none" else depolarizing_model(error_rate, kraus=noise == "kraus")
    return instrument(measure_all(qft_circuit(n)), model)


def _groups(config: BenchConfig):
    for n, noise in itertools.product(config.qubits, config.noise):
        # without noise the error rate is irrelevant; run it once
        rates = [0.0] if noise == "none" else config.error_rate
        for rate in rates:
            yield n, noise, rate


def _options(config: BenchConfig, strategy: str, workers: int) -> dict:
    opts = {"seed": config.seed, "workers": workers}
    if strategy == "branch":
        opts["budget"] = config.budget
    if strategy == "batch" and config.max_batch_size is not None:
        opts["max_batch_size"] = config.max_batch_size
    return opts


def timed_run(program: NoisyCircuit, shots: int, strategy: str, repeats: int, **options):
    """Median wall time over ``repeats`` runs, the first discarded as warm-up when there are several."""
    results = [run(program, shots, strategy, **options) for _ in range(repeats)]
    timed = results[1:] if len(results) > 1 else results
    return results[-1], statistics.median(r.timing for r in timed)


def first_divergent_shot(program: NoisyCircuit, shots: int, strategy: str, reference: str = "naive", **options) -> int:
    """Smallest shot index whose prefix counts differ between two strategies (-1 if none)."""

    def differs(k: int) -> bool:
        ref_opts = {"seed": options.get("seed", 0)}
        return run(program, k, strategy, **options).counts != run(program, k, reference, **ref_opts).counts

    if not differs(shots):
        return -1
    lo, hi = 1, shots
    while lo < hi:
        mid = (lo + hi) // 2
        if differs(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo - 1


def _record(config, n, noise, rate, strategy, workers, program) -> dict:
    return {
        "circuit": config.circuit,
        "qubits": n,
        "shots": config.shots,
        "noise": noise,
        "error_rate": rate,
        "strategy": strategy,
        "workers": workers,
        "seed": config.seed,
        "budget": config.budget,
        "max_batch_size": config.max_batch_size if config.max_batch_size is not None else "",
        "repeats": config.repeats,
        "wall_seconds": "",
        "dispatch_count": "",
        "peak_states": "",
        "passes": "",
        "noise_sites": program.noise_sites,
        "tvd": "",
        "checksum": "",
        "status": "ok",
    }


def run_bench(config: BenchConfig, stream=None) -> list[dict]:
    """Run the sweep; writes the CSV (if ``config.out``) and a summary table; returns the rows."""
    config.validate()
    rows = []
    for n, noise, rate in _groups(config):
        program = build_program(n, noise, rate)
        exact = exact_distribution(program) if n <= MAX_TVD_QUBITS else None
        checksums: dict[str, tuple] = {}
        for strategy, workers in itertools.product(config.strategy, config.workers):
            rec = _record(config, n, noise, rate, strategy, workers, program)
            opts = _options(config, strategy, workers)
            try:
                result, wall = timed_run(program, config.shots, strategy, config.repeats, **opts)
            except CapacityError as exc:
                rec["status"] = f"capacity: {exc}"
                rows.append(rec)
                log.warning("n=%d %s/%s: %s", n, strategy, workers, exc)
                continue
            _fill(rec, result, wall, exact)
            rows.append(rec)
            checksums[f"{strategy}/w{workers}"] = (result.checksum, strategy, opts)
        _check_group(program, config, n, noise, rate, checksums, rows)
    if config.out:
        write_csv(rows, config.out)
    print_summary(rows, stream or sys.stdout)
    return rows


def _fill(rec: dict, result: RunResult, wall: float, exact: Optional[dict]) -> None:
    rec["wall_seconds"] = f"{wall:.6f}"
    rec["dispatch_count"] = result.dispatch_count
    rec["peak_states"] = result.state_count if result.metadata.get("strategy") == "branch" else ""
    rec["passes"] = result.metadata.get("passes", "")
    rec["checksum"] = result.checksum
    if exact is not None:
        rec["tvd"] = f"{total_variation(result.counts, exact):.6f}"


def _check_group(program, config, n, noise, rate, checksums, rows) -> None:
    distinct = {c for c, _, _ in checksums.values()}
    if len(distinct) <= 1:
        return
    ref = next(iter(checksums.values()))[0]
    bad = {label: (c, s, o) for label, (c, s, o) in checksums.items() if c != ref}
    label, (_, strategy, opts) = next(iter(bad.items()))
    diagnostic = {
        "qubits": n,
        "noise": noise,
        "error_rate": rate,
        "seed": config.seed,
        "shots": config.shots,
        "checksums": {k: v[0] for k, v in checksums.items()},
        "first_divergent_shot": first_divergent_shot(program, config.shots, strategy, **opts),
        "divergent": label,
        "program": to_text(program.circuit) if program.circuit is not None else "",
    }
    if config.out:
        write_csv(rows, config.out)
    raise ChecksumMismatch(f"counts checksum mismatch for n={n} noise={noise} rate={rate}", diagnostic)


def write_csv(rows: Sequence[dict], path, columns=COLUMNS) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in columns})


def print_summary(rows: Sequence[dict], stream) -> None:
    head = ["qubits", "noise", "error_rate", "strategy", "workers", "wall_seconds", "dispatch_count", "peak_states", "tvd", "status"]
    table = [head] + [[str(r[k]) for k in head] for r in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(head))]
    for line in table:
        print("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip(), file=stream)


def trend_warnings(rows: Sequence[dict], strategy: str = "batch", kraus_spread: float = 0.25) -> list[str]:
    """Check the error-rate trends: Pauli time non-decreasing in rate, Kraus time roughly flat.

    Violations are returned (and logged) as warnings; timings are hardware dependent.
    """
    out = []
    groups: dict[tuple, list] = {}
    for r in rows:
        if r["strategy"] != strategy or r["status"] != "ok" or r["noise"] == "none":
            continue
        groups.setdefault((r["noise"], r["qubits"], r["workers"]), []).append((float(r["error_rate"]), float(r["wall_seconds"])))
    for (noise, n, workers), pts in sorted(groups.items()):
        pts.sort()
        times = [t for _, t in pts]
        if len(times) < 2:
            continue
        tag = f"{strategy} {noise} n={n} workers={workers}"
        if noise == "pauli":
            for (r0, t0), (r1, t1) in zip(pts, pts[1:]):
                if t1 < t0:
                    out.append(f"{tag}: time drops from {t0:.4f}s at rate {r0} to {t1:.4f}s at rate {r1}")
        elif noise == "kraus":
            spread = (max(times) - min(times)) / min(times)
            if spread >= kraus_spread:
                out.append(f"{tag}: time varies by {spread:.0%} across rates (expected < {kraus_spread:.0%})")
    for msg in out:
        log.warning("trend: %s", msg)
    return out


def emit_tvd_report(config: BenchConfig, out=None, shots: Optional[int] = None) -> list[dict]:
    """TVD of each strategy's counts against the exact distribution; cells above the qubit cap are skipped."""
    config.validate()
    shots = shots or config.shots
    rows = []
    for n, noise, rate in _groups(config):
        if n > MAX_TVD_QUBITS:
            log.info("skipping n=%d: exact oracle limited to %d qubits", n, MAX_TVD_QUBITS)
            rows.append({"qubits": n, "noise": noise, "error_rate": rate, "shots": shots, "seed": config.seed,
                         "status": f"skipped: n > {MAX_TVD_QUBITS}"})
            continue
        program = build_program(n, noise, rate)
        exact = exact_distribution(program)
        for strategy, workers in itertools.product(config.strategy, config.workers):
            result = run(program, shots, strategy, **_options(config, strategy, workers))
            rows.append({
                "qubits": n,
                "noise": noise,
                "error_rate": rate,
                "strategy": strategy,
                "workers": workers,
                "shots": shots,
                "seed": config.seed,
                "tvd": f"{total_variation(result.counts, exact):.6f}",
                "status": "ok",
            })
    if out:
        write_csv(rows, out, TVD_COLUMNS)
    return rows


# ---------------------------------------------------------------------------
# command line


def parse_qubits(text: str) -> list[int]:
    """``"5,10"`` lists values; ``"5..10"`` is an inclusive range; the two forms may mix."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = (int(x) for x in part.split(".."))
            if hi < lo:
                raise ValueError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(int(part))
    return out


def _list(conv):
    def parse(text: str):
        return [conv(x.strip()) for x in text.split(",") if x.strip()]

    return parse


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="multishot-bench", description="QFT noise sweeps over strategies, qubit counts and error rates.")
    p.add_argument("--circuit", default="qft", choices=["qft"])
    p.add_argument("--qubits", type=parse_qubits, default=[5], help="e.g. 5,10 or 5..10")
    p.add_argument("--shots", type=int, default=4000)
    p.add_argument("--noise", type=_list(str), default=["pauli"], help="pauli, kraus, none (comma list)")
    p.add_argument("--error-rate", type=_list(float), default=[0.01])
    p.add_argument("--strategy", type=_list(str), default=["naive", "batch", "branch"])
    p.add_argument("--workers", type=_list(int), default=[1])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=64, help="live-state budget for branch")
    p.add_argument("--max-batch-size", type=int, default=None)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", default=None, help="CSV path")
    p.add_argument("--tvd-report", default=None, metavar="PATH", help="also write a TVD-vs-exact CSV (n <= 6)")
    p.add_argument("--tvd-shots", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> BenchConfig:
    return BenchConfig(
        circuit=args.circuit,
        qubits=args.qubits,
        shots=args.shots,
        noise=args.noise,
        error_rate=args.error_rate,
        strategy=args.strategy,
        workers=args.workers,
        seed=args.seed,
        budget=args.budget,
        max_batch_size=args.max_batch_size,
        repeats=args.repeats,
        out=args.out,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    config = config_from_args(args)
    try:
        config.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    try:
        rows = run_bench(config)
    except ChecksumMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        for k, v in exc.diagnostic.items():
            print(f"  {k}: {v}", file=sys.stderr)
        return 2
    trend_warnings(rows)
    if args.tvd_report:
        emit_tvd_report(config, args.tvd_report, shots=args.tvd_shots)
    log.info("config: %s", asdict(config))
    return 0


if __name__ == "__main__":
    sys.exit(main())
