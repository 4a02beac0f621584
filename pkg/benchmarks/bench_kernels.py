"""Benchmark the batched noisy-CVaR kernel: numba vs pure-numpy backend.

Run: python benchmarks/bench_kernels.py --farmers 32 --arms 5 --repeats 30
"""

import argparse
import time

import numpy as np

from riskbandit.kernels import available_backends, bcb_batch_choose


def build_instance(rng, n_arms, history_len, n_farmers):
    values = np.concatenate(
        [np.sort(rng.uniform(0.0, 1.0, size=history_len)) for _ in range(n_arms)]
    )
    offsets = np.arange(n_arms + 1, dtype=np.int64) * history_len
    expo = rng.standard_exponential((n_farmers, values.size))
    tie_u = rng.random(n_farmers)
    return values, offsets, expo, tie_u


def bench(backend, instance, alpha, repeats):
    values, offsets, expo, tie_u = instance
    bcb_batch_choose(values, offsets, alpha, expo, tie_u, backend=backend)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        bcb_batch_choose(values, offsets, alpha, expo, tie_u, backend=backend)
    return (time.perf_counter() - start) / repeats * 1000.0


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--farmers", type=int, default=32)
    parser.add_argument("--arms", type=int, default=5)
    parser.add_argument("--alpha", type=float, default=0.3)
    parser.add_argument("--repeats", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = available_backends()
    rng = np.random.default_rng(args.seed)
    print(f"backends: {', '.join(backends)}; batch={args.farmers} farmers, "
          f"K={args.arms}, alpha={args.alpha}")
    print(f"{'history/arm':>12} " + " ".join(f"{b + ' ms':>12}" for b in backends)
          + f" {'speedup':>9}")
    for history_len in (50, 200, 1000, 5000, 20000):
        instance = build_instance(rng, args.arms, history_len, args.farmers)
        times = [bench(b, instance, args.alpha, args.repeats) for b in backends]
        speedup = times[-1] / times[0] if len(times) > 1 else float("nan")
        print(f"{history_len:>12} " + " ".join(f"{t:>12.3f}" for t in times)
              + f" {speedup:>8.1f}x")


if __name__ == "__main__":
    main()
