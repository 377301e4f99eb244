"""Compare the numba and numpy n-gram overlap kernels on synthetic report-like text.

    python3 benchmarks/bench_kernels.py [--pairs 5000] [--max-n 4] [--repeat 3]

Both kernels run on the same encoded pairs; the script checks they agree
before printing timings.
"""

import argparse
import time

import numpy as np

from medtri.metrics import _accel, encode_pairs
from medtri.metrics.kernels import ngram_stats_numba, ngram_stats_numpy


def make_pairs(n, rng, vocab=400, lo=20, hi=200):
    out = []
    for _ in range(n):
        c = rng.integers(vocab, size=rng.integers(lo, hi)).astype(str).tolist()
        # references share a chunk of the candidate so overlaps are not all zero
        r = c[: len(c) // 2] + rng.integers(vocab, size=rng.integers(lo, hi)).astype(str).tolist()
        out.append((c, r))
    return out


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = fn()
        times.append(time.perf_counter() - t0)
    return min(times), res


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=5000)
    ap.add_argument("--max-n", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    pairs = encode_pairs(make_pairs(args.pairs, np.random.default_rng(args.seed)))
    tokens = int(pairs.cand_lengths.sum() + pairs.ref_lengths.sum())
    print(f"{args.pairs} pairs, {tokens} tokens, max_n={args.max_n}")

    t_np, res_np = best_of(lambda: ngram_stats_numpy(pairs, args.max_n), args.repeat)
    print(f"numpy : {t_np * 1e3:9.1f} ms")
    if not _accel.NUMBA_INSTALLED:
        print("numba : not installed")
        return
    t0 = time.perf_counter()
    ngram_stats_numba(pairs.slice(0, 1), args.max_n)
    print(f"numba : {(time.perf_counter() - t0) * 1e3:9.1f} ms first call (compile)")
    t_nb, res_nb = best_of(lambda: ngram_stats_numba(pairs, args.max_n), args.repeat)
    print(f"numba : {t_nb * 1e3:9.1f} ms")
    assert np.array_equal(res_np.overlap, res_nb.overlap), "kernels disagree"
    print(f"speedup {t_np / t_nb:.1f}x, outputs identical")


if __name__ == "__main__":
    main()
