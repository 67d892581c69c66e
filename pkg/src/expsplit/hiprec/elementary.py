"""Elementary functions on ``ExReal``.

Each function works with one guard component beyond the target format and
rounds once at the end.
"""

from __future__ import annotations

import math
from decimal import Context, Decimal
from fractions import Fraction

import numpy as np

from . import _kernels as K
from .core import NCOMP, DomainError, ExReal, _fraction_components, as_exreal

_DIGITS = 110


def _machin_pi(digits: int) -> Fraction:
    # pi = 16 atan(1/5) - 4 atan(1/239) in scaled integer arithmetic
    scale = 10 ** (digits + 10)

    def atan_inv(n: int) -> int:
        total, term, k, sign = 0, scale // n, 1, 1
        n2 = n * n
        while term:
            total += sign * (term // k)
            term //= n2
            k += 2
            sign = -sign
        return total

    return Fraction(16 * atan_inv(5) - 4 * atan_inv(239), scale)


_PI = _fraction_components(_machin_pi(_DIGITS), 6)
_LN2 = _fraction_components(
    Fraction(Context(prec=_DIGITS).ln(Decimal(2))), 6
)


def pi(prec: str = "qd") -> ExReal:
    """The stored constant pi rounded to ``prec``."""
    k = NCOMP[prec]
    return ExReal._wrap(K.distill(_PI.copy(), _PI.size, k), prec)


def ln2(prec: str = "qd") -> ExReal:
    k = NCOMP[prec]
    return ExReal._wrap(K.distill(_LN2.copy(), _LN2.size, k), prec)


def _work(x: ExReal) -> tuple[np.ndarray, int]:
    kk = x.k + 1
    c = np.zeros(kk)
    c[: x.k] = x._c
    return c, kk


def _done(c: np.ndarray, x: ExReal) -> ExReal:
    return ExReal._wrap(K.distill(c.copy(), c.size, x.k), x.prec)


def _small_enough(term: np.ndarray, ref: float, kk: int) -> bool:
    return abs(term[0]) <= abs(ref) * 2.0 ** (-53 * kk - 8)


def sqrt(x) -> ExReal:
    x = as_exreal(x)
    if x.sign() < 0:
        raise DomainError("sqrt of a negative number")
    return ExReal._wrap(K.sqrt(x._c, x.k), x.prec)


def _expm1_reduced(r: np.ndarray, kk: int) -> np.ndarray:
    """exp(r) - 1 for |r| <= 0.35 via halving, Taylor and doubling."""
    h = 10
    t = K.ldexp(r, -h)
    total = t.copy()
    term = t.copy()
    n = 1
    while True:
        n += 1
        term = K.div(K.mul(term, t, kk), np.array([float(n)]), kk)
        if term[0] == 0.0 or _small_enough(term, total[0], kk):
            break
        total = K.add(total, term, kk)
    two = np.array([2.0])
    for _ in range(h):
        # e^{2t} - 1 = (e^t - 1)(e^t - 1 + 2)
        total = K.mul(total, K.add(total, two, kk), kk)
    return total


def exp(x) -> ExReal:
    x = as_exreal(x)
    if not x:
        return ExReal(1, x.prec)
    x0 = float(x._c[0])
    if x0 > 709.0:
        raise OverflowError("exp overflow")
    if x0 < -745.0:
        return ExReal(0, x.prec)
    c, kk = _work(x)
    n = round(x0 / math.log(2.0))
    r = K.sub(c, K.mul_double(_LN2, float(n), kk + 1), kk)
    em1 = _expm1_reduced(r, kk)
    val = K.add(em1, np.array([1.0]), kk)
    return _done(K.ldexp(val, n), x)


def expm1(x) -> ExReal:
    """exp(x) - 1 without cancellation for small |x|."""
    x = as_exreal(x)
    if abs(float(x._c[0])) > 0.3:
        return exp(x) - 1
    c, kk = _work(x)
    return _done(_expm1_reduced(c, kk), x)


def log(x) -> ExReal:
    x = as_exreal(x)
    if x.sign() <= 0:
        raise DomainError("log of a non-positive number")
    _, e = math.frexp(float(x._c[0]))
    m = x.ldexp(-e)
    y = ExReal(math.log(float(m._c[0])), x.prec)
    c, kk = _work(m)
    yw = np.zeros(kk)
    yw[0] = y._c[0]
    one = np.array([1.0])
    for _ in range(3):
        # Newton on exp(y) = m: y <- y + m exp(-y) - 1
        ey = _exp_work(-yw, kk)
        yw = K.add(yw, K.sub(K.mul(c, ey, kk), one, kk), kk)
    yw = K.add(yw, K.mul_double(_LN2, float(e), kk + 1), kk)
    return _done(yw, x)


def _exp_work(c: np.ndarray, kk: int) -> np.ndarray:
    n = round(float(c[0]) / math.log(2.0))
    r = K.sub(c, K.mul_double(_LN2, float(n), kk + 1), kk)
    val = K.add(_expm1_reduced(r, kk), np.array([1.0]), kk)
    return K.ldexp(val, n)


def _sincos_reduced(t: np.ndarray, kk: int) -> tuple[np.ndarray, np.ndarray]:
    """Taylor series of sin and cos for |t| <= pi/4."""
    s = t.copy()
    c = np.zeros(kk)
    c[0] = 1.0
    t2 = K.mul(t, t, kk)
    term = t.copy()
    n = 1
    while True:
        term = K.div(K.mul(term, t, kk), np.array([float(n + 1)]), kk)
        n += 1
        if term[0] == 0.0 or _small_enough(term, 1.0, kk):
            break
        sign = -1.0 if (n // 2) % 2 else 1.0
        if n % 2 == 0:
            c = K.add(c, sign * term, kk)
        else:
            s = K.add(s, sign * term, kk)
    del t2
    return s, c


def _sincos_work(c: np.ndarray, kk: int) -> tuple[np.ndarray, np.ndarray]:
    half_pi = K.ldexp(_PI, -1)
    n = round(float(c[0]) / (math.pi / 2))
    t = K.sub(c, K.mul_double(half_pi, float(n), kk + 1), kk)
    s, co = _sincos_reduced(t, kk)
    q = n % 4
    if q == 0:
        return s, co
    if q == 1:
        return co, -s
    if q == 2:
        return -s, -co
    return -co, s


def sin(x) -> ExReal:
    x = as_exreal(x)
    c, kk = _work(x)
    return _done(_sincos_work(c, kk)[0], x)


def cos(x) -> ExReal:
    x = as_exreal(x)
    c, kk = _work(x)
    return _done(_sincos_work(c, kk)[1], x)


def atan2(y, x) -> ExReal:
    """Angle of the point ``(x, y)`` in ``(-pi, pi]``."""
    y = as_exreal(y)
    x = as_exreal(x, y.prec if not isinstance(x, ExReal) else None)
    if not x and not y:
        raise DomainError("atan2(0, 0) is undefined")
    k = max(x.k, y.k)
    kk = k + 1
    # rescale by a power of two so the squares neither underflow nor overflow
    shift = -math.frexp(max(abs(float(x._c[0])), abs(float(y._c[0]))))[1]
    xw = np.zeros(kk)
    xw[: x.k] = K.ldexp(x._c.copy(), shift)
    yw = np.zeros(kk)
    yw[: y.k] = K.ldexp(y._c.copy(), shift)
    r = K.sqrt(K.add(K.mul(xw, xw, kk), K.mul(yw, yw, kk), kk), kk)
    xn = K.div(xw, r, kk)
    yn = K.div(yw, r, kk)
    th = np.zeros(kk)
    th[0] = math.atan2(float(y._c[0]), float(x._c[0]))
    for _ in range(3):
        s, c = _sincos_work(th, kk)
        # sin(phi - theta) = yn cos(theta) - xn sin(theta)
        th = K.add(th, K.sub(K.mul(yn, c, kk), K.mul(xn, s, kk), kk), kk)
    prec = "dd" if k <= 2 else "qd"
    return ExReal._wrap(K.distill(th.copy(), kk, k), prec)
