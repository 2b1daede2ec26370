"""Time the numba and numpy coupled-dipole kernels against each other.

Usage: python benchmarks/bench_kernels.py [--sizes 100 400 900] [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from rydmirror import _kernels as K
from rydmirror.susceptibility import chi_two_level
from rydmirror.units import NM, TWO_PI


def square(n, a):
    i = np.arange(n) - (n - 1) / 2
    xx, yy = np.meshgrid(i, i, indexing="ij")
    return np.column_stack([xx.ravel() * a, yy.ravel() * a, np.zeros(n * n)])


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[100, 400, 900])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    lam = 780 * NM
    k = TWO_PI / lam
    print(f"numba available: {K.HAVE_NUMBA}")
    print(f"{'atoms':>6} {'kernel':>18} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8} {'rel diff':>9}")
    for n_atoms in args.sizes:
        n = int(round(np.sqrt(n_atoms)))
        pos = square(n, 0.68 * lam)
        alpha = np.full(len(pos), chi_two_level(0.0, 1.0))
        x = np.random.default_rng(0).standard_normal(3 * len(pos)) + 0j
        th = np.linspace(0, 0.7, 64)
        kvecs = k * np.column_stack([np.sin(th), np.zeros_like(th), -np.cos(th)])
        cases = [("interaction_matrix", K.interaction_matrix_numpy, getattr(K, "interaction_matrix_numba", None),
                  (pos, k, alpha)),
                 ("structure_sum", K.structure_sum_numpy, getattr(K, "structure_sum_numba", None),
                  (kvecs, pos, x.reshape(-1, 3)))]
        for name, f_np, f_nb, fargs in cases:
            t_np = best_of(lambda: f_np(*fargs), args.repeat)
            if f_nb is None:
                print(f"{len(pos):>6} {name:>18} {t_np:>10.4f} {'n/a':>10}")
                continue
            f_nb(*fargs)  # compile
            t_nb = best_of(lambda: f_nb(*fargs), args.repeat)
            ref = f_np(*fargs)
            diff = np.max(np.abs(ref - f_nb(*fargs))) / np.max(np.abs(ref))
            print(f"{len(pos):>6} {name:>18} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>8.2f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
