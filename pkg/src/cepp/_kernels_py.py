"""Pure-Python twin of the compiled bisection kernels.

Incidence codes: 0 linear, 1 Michaelis-Menten.  Every kernel returns
``(root, iterations)``.
"""

FTOL = 1e-12
XTOL = 1e-13
MAXITER = 200
BRACKET_DOUBLINGS = 200


def _g(kind, alpha, i):
    if kind == 1:
        return 1.0 / (1.0 + alpha * i)
    return 1.0


def bisect_decreasing(fn, lo, hi, maxiter=MAXITER):
    """Bisection for a decreasing ``fn`` with ``fn(lo) > 0 > fn(hi)``."""
    mid = lo
    it = 0
    for k in range(maxiter):
        mid = 0.5 * (lo + hi)
        f = fn(mid)
        it = k + 1
        if f == 0.0 or (abs(f) < FTOL and hi - lo < XTOL):
            return mid, it
        if f > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < XTOL:
            return 0.5 * (lo + hi), it
    return mid, it


def boundary_root(lam, mu, beta, v, kind, alpha):
    return bisect_decreasing(lambda i: beta * ((lam - v * i) / mu) * _g(kind, alpha, i) - v, 0.0, lam / v)


def inner_root(slope, s, kind, alpha):
    if slope * s <= 1.0 or kind == 0:
        return 0.0, 0
    target = 1.0 / (slope * s)
    lo, hi = 0.0, 1.0
    k = 0
    while _g(kind, alpha, hi) - target >= 0.0 and k < BRACKET_DOUBLINGS:
        lo, hi = hi, 2.0 * hi
        k += 1
    return bisect_decreasing(lambda i: _g(kind, alpha, i) - target, lo, hi)


def coexist_root(lam, mu, b1, v1, k1, a1, b2, v2, k2, a2, s_lo, s_hi):
    def balance(s):
        i1 = inner_root(b1 / v1, s, k1, a1)[0]
        i2 = inner_root(b2 / v2, s, k2, a2)[0]
        return lam - mu * s - v1 * i1 - v2 * i2

    return bisect_decreasing(balance, s_lo, s_hi)
