"""Side-by-side naive / batch / branch on one noisy QFT: time, dispatches, states, TVD."""
import argparse
import time

from multishot import exact_distribution, run, total_variation
from multishot.bench import MAX_TVD_QUBITS, build_program


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--qubits", type=int, default=6)
    p.add_argument("--shots", type=int, default=4000)
    p.add_argument("--noise", default="pauli", choices=["pauli", "kraus", "none"])
    p.add_argument("--error-rate", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=64)
    args = p.parse_args()

    prog = build_program(args.qubits, args.noise, args.error_rate)
    exact = exact_distribution(prog) if args.qubits <= MAX_TVD_QUBITS else None
    print(f"QFT({args.qubits}) {args.noise} p={args.error_rate}: {prog.noise_sites} noise sites, {args.shots} shots")
    print(f"{'strategy':<8} {'seconds':>9} {'dispatches':>11} {'states':>7} {'tvd':>8}  checksum")
    for strategy in ("naive", "batch", "branch"):
        t0 = time.perf_counter()
        r = run(prog, args.shots, strategy, seed=args.seed, budget=args.budget)
        wall = time.perf_counter() - t0
        tvd = f"{total_variation(r.counts, exact):.4f}" if exact else "-"
        states = r.state_count if strategy == "branch" else "-"
        print(f"{strategy:<8} {wall:9.3f} {r.dispatch_count:11d} {states!s:>7} {tvd:>8}  {r.checksum}")


if __name__ == "__main__":
    main()
