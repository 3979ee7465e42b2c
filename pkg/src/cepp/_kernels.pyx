# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bisection kernels for Linear (code 0) and Michaelis-Menten
(code 1) incidences.  Mirrors ``cepp._kernels_py`` exactly."""

from libc.math cimport fabs

DEF FTOL = 1e-12
DEF XTOL = 1e-13
DEF MAXITER = 200
DEF BRACKET_DOUBLINGS = 200


cdef inline double _g(int kind, double alpha, double i) noexcept nogil:
    if kind == 1:
        return 1.0 / (1.0 + alpha * i)
    return 1.0


cdef inline double _phi(double i, double lam, double mu, double beta, double v,
                        int kind, double alpha) noexcept nogil:
    return beta * ((lam - v * i) / mu) * _g(kind, alpha, i) - v


cdef double _inner(double slope, double s, int kind, double alpha, int *iters) noexcept nogil:
    cdef double target, lo, hi, mid, h
    cdef int k
    iters[0] = 0
    if slope * s <= 1.0 or kind == 0:
        return 0.0
    target = 1.0 / (slope * s)
    lo = 0.0
    hi = 1.0
    k = 0
    while _g(kind, alpha, hi) - target >= 0.0 and k < BRACKET_DOUBLINGS:
        lo = hi
        hi *= 2.0
        k += 1
    for k in range(MAXITER):
        mid = 0.5 * (lo + hi)
        h = _g(kind, alpha, mid) - target
        iters[0] = k + 1
        if h == 0.0 or fabs(h) < FTOL and hi - lo < XTOL:
            return mid
        if h > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < XTOL:
            break
    return 0.5 * (lo + hi)


def boundary_root(double lam, double mu, double beta, double v, int kind, double alpha):
    """Root of the decreasing boundary function on [0, lam/v].

    Returns ``(i_star, iterations)``; the caller guarantees phi(0) > 0.
    """
    cdef double lo = 0.0, hi = lam / v, mid = 0.0, f
    cdef int k, it = 0
    with nogil:
        for k in range(MAXITER):
            mid = 0.5 * (lo + hi)
            f = _phi(mid, lam, mu, beta, v, kind, alpha)
            it = k + 1
            if f == 0.0 or fabs(f) < FTOL and hi - lo < XTOL:
                break
            if f > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo < XTOL:
                mid = 0.5 * (lo + hi)
                break
    return mid, it


def inner_root(double slope, double s, int kind, double alpha):
    """Positive solution of g(i) = 1/(slope*s), or 0 when slope*s <= 1."""
    cdef int it = 0
    cdef double r
    with nogil:
        r = _inner(slope, s, kind, alpha, &it)
    return r, it


cdef double _balance(double s, double lam, double mu,
                     double b1, double v1, int k1, double a1,
                     double b2, double v2, int k2, double a2) noexcept nogil:
    cdef int it
    cdef double i1 = _inner(b1 / v1, s, k1, a1, &it)
    cdef double i2 = _inner(b2 / v2, s, k2, a2, &it)
    return lam - mu * s - v1 * i1 - v2 * i2


def coexist_root(double lam, double mu,
                 double b1, double v1, int k1, double a1,
                 double b2, double v2, int k2, double a2,
                 double s_lo, double s_hi):
    """Root of the decreasing balance function on (s_lo, s_hi); both strains nonlinear."""
    cdef double lo = s_lo, hi = s_hi, mid = 0.0, f
    cdef int k, it = 0
    with nogil:
        for k in range(MAXITER):
            mid = 0.5 * (lo + hi)
            f = _balance(mid, lam, mu, b1, v1, k1, a1, b2, v2, k2, a2)
            it = k + 1
            if f == 0.0 or fabs(f) < FTOL and hi - lo < XTOL:
                break
            if f > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo < XTOL:
                mid = 0.5 * (lo + hi)
                break
    return mid, it
