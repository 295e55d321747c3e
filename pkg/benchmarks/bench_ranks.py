#!/usr/bin/env python3
"""Benchmark the compiled rank-count kernel against the numpy fallback.

Both implementations share one contract (see fairpareto.ranking); this
script times them on identical inputs and verifies they agree before
reporting. Run from a checkout with the extension built:

    python3 benchmarks/bench_ranks.py [--sizes 500,1000,2000] [--dim 128]
"""
import argparse
import time

import numpy as np

from fairpareto.ranking import HAVE_COMPILED_KERNEL, rank_counts_numpy

try:
    from fairpareto._rankcore import rank_counts as compiled_rank_counts
except ImportError:
    compiled_rank_counts = None


def make_problem(rng, n, d, image_per_identity=3):
    vectors = np.ascontiguousarray(rng.standard_normal((n, d)))
    identities = np.ascontiguousarray(
        rng.integers(0, max(2, n // image_per_identity), size=n),
        dtype=np.int64)
    return vectors, identities


def best_of(fn, repeats, *args):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="500,1000,2000,4000",
                        help="comma-separated probe counts")
    parser.add_argument("--dim", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    rng = np.random.default_rng(args.seed)

    if compiled_rank_counts is None:
        print("compiled kernel not importable; timing the numpy path only")
    print(f"dim={args.dim}  repeats={args.repeats} (best shown)  "
          f"compiled_kernel_active={HAVE_COMPILED_KERNEL}")
    print(f"{'n':>6}  {'numpy (s)':>10}  {'compiled (s)':>12}  {'speedup':>8}")

    for n in sizes:
        vectors, identities = make_problem(rng, n, args.dim)
        t_numpy, (ranks_np, excl_np) = best_of(
            rank_counts_numpy, args.repeats, vectors, identities)
        if compiled_rank_counts is None:
            print(f"{n:>6}  {t_numpy:>10.4f}  {'-':>12}  {'-':>8}")
            continue
        t_comp, (ranks_c, excl_c) = best_of(
            compiled_rank_counts, args.repeats, vectors, identities)
        if not (np.array_equal(ranks_np, ranks_c)
                and np.array_equal(excl_np, excl_c)):
            raise SystemExit(f"kernel disagreement at n={n}")
        print(f"{n:>6}  {t_numpy:>10.4f}  {t_comp:>12.4f}  "
              f"{t_numpy / t_comp:>7.2f}x")


if __name__ == "__main__":
    main()
