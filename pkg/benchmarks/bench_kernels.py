"""Time the GP log marginal likelihood + gradient on both backends.

    python benchmarks/bench_kernels.py [--repeat N]

Sizes cover the active-learning regime: a handful to ~100 training points
and 1 to 6 inputs. Each row reports microseconds per call and the speedup
of the compiled kernel over the numpy fallback.
"""

import argparse
import timeit

import numpy as np

from fbgp_al import _backend

SIZES = [(5, 1), (30, 1), (30, 6), (60, 3), (100, 1), (100, 6)]


def bench(fn, X, y, ls, noise, repeat):
    timer = timeit.Timer(lambda: fn(X, y, ls, noise, True))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number * 1e6


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    python = _backend.get_lml_and_grad("python")
    compiled = _backend.get_lml_and_grad("compiled") if _backend.compiled_available() else None
    rng = np.random.default_rng(0)
    print(f"{'n':>4} {'d':>2} {'python us':>10} {'compiled us':>12} {'speedup':>8} {'max |diff|':>11}")
    for n, d in SIZES:
        X = rng.random((n, d))
        y = rng.standard_normal(n)
        ls = rng.uniform(-1.0, 0.5, d)
        noise = -1.5
        t_py = bench(python, X, y, ls, noise, args.repeat)
        if compiled is None:
            print(f"{n:>4} {d:>2} {t_py:>10.1f} {'n/a':>12}")
            continue
        t_c = bench(compiled, X, y, ls, noise, args.repeat)
        a, b = python(X, y, ls, noise), compiled(X, y, ls, noise)
        diff = max(abs(a[0] - b[0]), float(np.max(np.abs(a[1] - b[1]))))
        print(f"{n:>4} {d:>2} {t_py:>10.1f} {t_c:>12.1f} {t_py / t_c:>7.1f}x {diff:>11.1e}")


if __name__ == "__main__":
    main()
