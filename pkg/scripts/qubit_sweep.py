"""QFT timing sweep over qubit count for every strategy (1% Pauli noise, 4000 shots)."""
import argparse
import logging

from multishot.bench import BenchConfig, parse_qubits, run_bench


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--qubits", type=parse_qubits, default=list(range(5, 11)))
    p.add_argument("--shots", type=int, default=4000)
    p.add_argument("--noise", default="pauli", choices=["pauli", "kraus", "none"])
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out", default="results/qubit_sweep.csv")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    cfg = BenchConfig(qubits=args.qubits, shots=args.shots, noise=[args.noise], error_rate=[0.01],
                      repeats=args.repeats, out=args.out)
    run_bench(cfg)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
