"""Batch timing as a function of error rate, Pauli vs Kraus, with trend checks."""
import argparse
import logging

from multishot.bench import BenchConfig, parse_qubits, run_bench, trend_warnings


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--qubits", type=parse_qubits, default=[8])
    p.add_argument("--rates", default="0.001,0.01,0.05,0.1")
    p.add_argument("--shots", type=int, default=4000)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out", default="results/error_rate_sweep.csv")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    cfg = BenchConfig(
        qubits=args.qubits,
        shots=args.shots,
        noise=["pauli", "kraus"],
        error_rate=[float(r) for r in args.rates.split(",")],
        strategy=["batch"],
        repeats=args.repeats,
        out=args.out,
    )
    rows = run_bench(cfg)
    warnings = trend_warnings(rows)
    print("trend:", "as expected" if not warnings else f"{len(warnings)} warning(s)")
    for w in warnings:
        print("  " + w)


if __name__ == "__main__":
    main()
