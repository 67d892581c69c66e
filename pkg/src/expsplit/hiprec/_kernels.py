"""Compiled building blocks for multi-component floating point.

A value is a float64 array of ``k`` components whose exact sum is the
represented number.  Every kernel returns components that are decreasing in
magnitude and non-overlapping (``|c[i+1]| <= ulp(c[i])``).

All kernels avoid fused multiply-add: products are split with Dekker's
algorithm so the error-free transforms stay exact on every target.
"""

import numpy as np
from numba import njit

_SPLITTER = 134217729.0  # 2**27 + 1


@njit(cache=True, inline="always")
def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True, inline="always")
def quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


@njit(cache=True, inline="always")
def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


@njit(cache=True, inline="always")
def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True)
def _finish(c, n, k):
    """Turn ``n`` roughly decreasing partial sums into ``k`` clean components."""
    for _ in range(2):
        # bottom-up then top-down passes of two_sum
        for i in range(n - 1, 0, -1):
            c[i - 1], c[i] = two_sum(c[i - 1], c[i])
        for i in range(n - 1):
            c[i], c[i + 1] = two_sum(c[i], c[i + 1])
    out = np.zeros(k)
    m = 0
    for i in range(n):
        if c[i] != 0.0:
            if m < k:
                out[m] = c[i]
            elif m == k:
                # round the first dropped component into the last kept one
                out[k - 1] = out[k - 1] + c[i]
            m += 1
    for i in range(k - 1):
        out[i], out[i + 1] = two_sum(out[i], out[i + 1])
    return out


@njit(cache=True)
def distill(x, n, k):
    """Exactly sum ``x[:n]`` and return the result rounded to ``k`` components.

    ``x`` is used as scratch space.  Repeated recursive-summation passes each
    peel off one partial sum while keeping the rounding errors exactly; they
    stop once nothing is left or enough leading bits are settled.
    """
    m = 0
    for i in range(n):
        if x[i] != 0.0:
            x[m] = x[i]
            m += 1
    if m == 0:
        return np.zeros(k)
    order = np.argsort(np.abs(x[:m]))
    y = x[:m][order]
    maxpass = 2 * k + 6
    comps = np.zeros(maxpass + 1)
    npass = 0
    while m > 0 and npass < maxpass:
        s = 0.0
        m2 = 0
        for i in range(m):
            s, e = two_sum(s, y[i])
            if e != 0.0:
                y[m2] = e
                m2 += 1
        comps[npass] = s
        npass += 1
        m = m2
    if m > 0:
        r = 0.0
        for i in range(m):
            r += y[i]
        comps[npass] = r
        npass += 1
    return _finish(comps, npass, k)


@njit(cache=True)
def add(a, b, k):
    x = np.empty(a.size + b.size)
    x[: a.size] = a
    x[a.size :] = b
    return distill(x, x.size, k)


@njit(cache=True)
def sub(a, b, k):
    x = np.empty(a.size + b.size)
    x[: a.size] = a
    x[a.size :] = -b
    return distill(x, x.size, k)


@njit(cache=True)
def neg(a):
    return -a


@njit(cache=True)
def _prod_terms(a, b, k, x, n):
    """Append the terms of ``a*b`` needed for ``k`` components to ``x``."""
    for i in range(a.size):
        if a[i] == 0.0:
            continue
        for j in range(b.size):
            if i + j < k:
                p, e = two_prod(a[i], b[j])
                x[n] = p
                x[n + 1] = e
                n += 2
            elif i + j == k:
                x[n] = a[i] * b[j]
                n += 1
    return n


@njit(cache=True)
def mul(a, b, k):
    x = np.empty(2 * a.size * b.size)
    n = _prod_terms(a, b, k, x, 0)
    return distill(x, n, k)


@njit(cache=True)
def mul_double(a, d, k):
    x = np.empty(2 * a.size)
    for i in range(a.size):
        x[2 * i], x[2 * i + 1] = two_prod(a[i], d)
    return distill(x, x.size, k)


@njit(cache=True)
def dot(A, B, k):
    """Sum of ``A[i]*B[i]`` over rows, rounded once to ``k`` components."""
    nrow = A.shape[0]
    x = np.empty(2 * nrow * A.shape[1] * B.shape[1])
    n = 0
    for r in range(nrow):
        n = _prod_terms(A[r], B[r], k + 1, x, n)
    return distill(x, n, k)


@njit(cache=True)
def div(a, b, k):
    """Long division: one float64 quotient digit per pass on an exact remainder."""
    kk = k + 2
    r = np.zeros(kk)
    r[: a.size] = a
    q = np.zeros(k + 1)
    x = np.empty(kk + 2 * b.size)
    for i in range(k + 1):
        qi = r[0] / b[0]
        q[i] = qi
        x[:kk] = r
        for j in range(b.size):
            p, e = two_prod(qi, b[j])
            x[kk + 2 * j] = -p
            x[kk + 2 * j + 1] = -e
        r = distill(x, x.size, kk)
        if r[0] == 0.0:
            break
    return distill(q, q.size, k)


@njit(cache=True)
def sqrt(a, k):
    """Newton on ``x <- x + (a - x*x) / (2x)`` with extra working components."""
    if a[0] == 0.0:
        return np.zeros(k)
    kk = k + 1
    x = np.zeros(kk)
    x[0] = np.sqrt(a[0])
    nit = 1
    bits = 53
    while bits < 53 * kk:
        bits *= 2
        nit += 1
    for _ in range(nit):
        r = sub(a, mul(x, x, kk + 1), kk)
        d = div(r, mul_double(x, 2.0, kk), kk)
        x = add(x, d, kk)
    return distill(x, kk, k)


@njit(cache=True)
def ldexp(a, e):
    out = np.empty(a.size)
    for i in range(a.size):
        out[i] = np.ldexp(a[i], e)
    return out


@njit(cache=True)
def horner(coef, x, k):
    """Evaluate ``sum coef[i] x**i`` with rows of ``coef`` as values."""
    n = coef.shape[0]
    acc = coef[n - 1].copy()
    for i in range(n - 2, -1, -1):
        acc = add(mul(acc, x, k), coef[i], k)
    return acc
