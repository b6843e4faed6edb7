"""Compare the numba kernels with their numpy fallbacks.

Run ``python3 benchmarks/bench_kernels.py [--repeat 5] [--size 200000]``.
Each kernel is checked for agreement before timing; the first numba call
is excluded (compilation).
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from c2approx import _kernels as K
from c2approx.polynomial import total_degree_exponents


def cases(size: int, rng):
    x = rng.uniform(-1, 1, size)
    coef = rng.standard_normal(40)
    xs = rng.uniform(-1, 1, (size // 10, 2))
    exps = total_degree_exponents(16, 2).astype(np.int64)
    vals = rng.standard_normal(size)
    w = rng.random(size)
    starts = np.unique(np.concatenate([[0], np.sort(rng.integers(0, size, size // 50)), [size]]))
    return {
        "clenshaw": (K.clenshaw_np, getattr(K, "_clenshaw_nb", None), (coef, x)),
        "chebvander": (K.chebvander_np, getattr(K, "_chebvander_nb", None), (x[: size // 10], 24)),
        "total_vander": (K.total_vander_np, getattr(K, "_total_vander_nb", None), (xs, exps)),
        "segment_power_sum(q=2)": (K.segment_power_sum_np, getattr(K, "_segment_power_sum_nb", None),
                                   (vals, w, starts, 2.0)),
        "segment_power_sum(q=inf)": (K.segment_power_sum_np, getattr(K, "_segment_power_sum_nb", None),
                                     (vals, w, starts, np.inf)),
    }


def _close(a, b):
    if isinstance(a, tuple):
        return all(_close(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"numba active: {K.USING_NUMBA}")
    print(f"{'kernel':28s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for name, (f_np, f_nb, a) in cases(args.size, rng).items():
        t_np = min(timeit.repeat(lambda: f_np(*a), number=1, repeat=args.repeat)) * 1e3
        if f_nb is None:
            print(f"{name:28s} {t_np:11.2f} {'-':>11s} {'-':>8s}")
            continue
        ref = f_np(*a)
        if not _close(ref, f_nb(*a)):  # also triggers compilation
            raise SystemExit(f"{name}: numba and numpy results differ")
        t_nb = min(timeit.repeat(lambda: f_nb(*a), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:28s} {t_np:11.2f} {t_nb:11.2f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
