"""Benchmark the compiled pairwise-scan kernels against the numpy fallback.

Run:  python benchmarks/bench_fastpath.py
"""

import time

import numpy as np

from roughsmile import _fastpath_py
from roughsmile._accel import HAVE_COMPILED

try:
    from roughsmile import _fastpath
except ImportError:
    _fastpath = None


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    print(f"compiled extension available: {HAVE_COMPILED}")
    print(f"{'case':<28}{'numpy':>12}{'compiled':>12}{'speedup':>10}")

    for n in (256, 1024, 4096):
        x = np.ascontiguousarray(np.cumsum(rng.normal(size=n + 1)))
        w = (np.arange(1, n + 1) / n) ** -0.45
        t_py = timeit(_fastpath_py.max_weighted_increment, x, w)
        if _fastpath is None:
            print(f"{f'norm scan n={n}':<28}{t_py * 1e3:>10.2f}ms{'-':>12}{'-':>10}")
            continue
        t_c = timeit(_fastpath.max_weighted_increment, x, w)
        a = _fastpath.max_weighted_increment(x, w)
        b = _fastpath_py.max_weighted_increment(x, w)
        assert a == b, "implementations disagree"
        print(
            f"{f'norm scan n={n}':<28}{t_py * 1e3:>10.2f}ms{t_c * 1e3:>10.2f}ms"
            f"{t_py / t_c:>10.1f}"
        )

    for rows, n in ((2000, 256), (20000, 256)):
        x = np.ascontiguousarray(np.cumsum(rng.normal(size=(rows, n + 1)), axis=1))
        w = (np.arange(1, n + 1) / n) ** -0.4
        t_py = timeit(_fastpath_py.batch_max_weighted_increment, x, w, repeat=3)
        if _fastpath is None:
            continue
        t_c = timeit(_fastpath.batch_max_weighted_increment, x, w, repeat=3)
        assert np.array_equal(
            _fastpath.batch_max_weighted_increment(x, w),
            _fastpath_py.batch_max_weighted_increment(x, w),
        )
        print(
            f"{f'batch {rows}x{n}':<28}{t_py * 1e3:>10.2f}ms{t_c * 1e3:>10.2f}ms"
            f"{t_py / t_c:>10.1f}"
        )


if __name__ == "__main__":
    main()
