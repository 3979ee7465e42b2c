"""Compiled vs pure-Python bisection kernels.

    python3 benchmarks/bench_kernels.py [--points N] [--repeat R]

Times the nested coexistence solve (outer balance bisection over inner
``g(i) = 1/(R s)`` bisections) and the single-strain boundary solve on a
grid of Michaelis-Menten parameter sets, checks that both backends return
the same roots, and prints the speedup.
"""

import argparse
import time

import numpy as np

from cepp import kernels


def _cases(n):
    rng = np.random.default_rng(0)
    out = []
    while len(out) < n:
        b1, b2 = rng.uniform(0.5, 3.0, 2)
        a1, a2 = rng.uniform(0.1, 2.0, 2)
        lam, mu, v1, v2 = 1.0, 0.25, 1.0, 1.0
        s1 = (lam - v1 * kernels.python_backend.boundary_root(lam, mu, b1, v1, 1, a1)[0]) / mu
        s2 = (lam - v2 * kernels.python_backend.boundary_root(lam, mu, b2, v2, 1, a2)[0]) / mu
        lo, hi = max(v1 / b1, v2 / b2), min(s1, s2)
        if lo < hi:
            out.append((lam, mu, b1, v1, 1, a1, b2, v2, 1, a2, lo, hi))
    return out


def _time(fn, cases, repeat):
    best = float("inf")
    roots = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        roots = [fn(*c)[0] for c in cases]
        best = min(best, time.perf_counter() - t0)
    return best, np.array(roots)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if kernels.compiled_backend is None:
        raise SystemExit("compiled backend not built; run `pip install -e . --no-build-isolation`")
    py, cy = kernels.python_backend, kernels.compiled_backend
    coex = _cases(args.points)
    bound = [(c[0], c[1], c[2], c[3], 1, c[5]) for c in coex]
    print(f"{'kernel':<14}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}{'max |diff|':>14}")
    for name, fn_py, fn_cy, cases in (
        ("coexist_root", py.coexist_root, cy.coexist_root, coex),
        ("boundary_root", py.boundary_root, cy.boundary_root, bound),
    ):
        tp, rp = _time(fn_py, cases, args.repeat)
        tc, rc = _time(fn_cy, cases, args.repeat)
        print(f"{name:<14}{tp:>12.4f}{tc:>14.4f}{tp / tc:>10.1f}{np.abs(rp - rc).max():>14.2e}")


if __name__ == "__main__":
    main()
