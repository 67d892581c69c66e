"""Extended-precision real and complex scalars.

``ExReal`` stores an unevaluated sum of 2 (``"dd"``) or 4 (``"qd"``) float64
components.  Mixed-precision operations promote to the wider format.  Python
ints, floats and ``Fraction`` values are converted exactly before use.

Relative accuracy holds while the trailing components stay normal floats,
i.e. for magnitudes above roughly 1e-290 (dd) or 1e-260 (qd); below that the
value degrades gracefully towards plain double precision.
"""

from __future__ import annotations

from decimal import Decimal, localcontext
from fractions import Fraction
from numbers import Rational

import numpy as np

from . import _kernels as K

NCOMP = {"dd": 2, "qd": 4}
#: unit of least precision for each format, relative to the leading bit
EPS = {"dd": 2.0**-104, "qd": 2.0**-209}
DEFAULT_PREC = "qd"


class HiPrecError(ArithmeticError):
    """Base class for extended-precision arithmetic failures."""


class DomainError(HiPrecError, ValueError):
    """Argument outside the domain of an elementary function."""


class NonFiniteError(HiPrecError):
    """A component became NaN or infinite."""


def _prec_of(k: int) -> str:
    return "dd" if k <= 2 else "qd"


def _fraction_components(value: Fraction, k: int) -> np.ndarray:
    # successive correctly rounded float() calls peel off exact remainders
    out = np.zeros(k)
    rest = value
    for i in range(k):
        c = float(rest)
        if c == 0.0:
            break
        out[i] = c
        rest -= Fraction(c)
    return out


def _check(c: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(c)):
        raise NonFiniteError(f"non-finite component in {c!r}")
    return c


class ExReal:
    """Real number held as a non-overlapping float64 expansion.

    Parameters
    ----------
    value : int, float, Fraction, str or ExReal
        Value to convert.  Strings may be decimal (``"1.25e-3"``) or
        rational (``"1/3"``) literals and are rounded once.
    prec : {"dd", "qd"}
        Target format.
    """

    __slots__ = ("_c", "prec")

    def __init__(self, value=0, prec: str | None = None):
        if isinstance(value, ExReal):
            prec = prec or value.prec
            k = NCOMP[prec]
            c = value._c
            if c.size != k:
                c = K.distill(c.copy(), c.size, k)
            self._c, self.prec = c, prec
            return
        prec = prec or DEFAULT_PREC
        if prec not in NCOMP:
            raise ValueError(f"unknown precision {prec!r}")
        k = NCOMP[prec]
        if isinstance(value, float):
            c = np.zeros(k)
            c[0] = value
        elif isinstance(value, (int, Rational)):
            c = _fraction_components(Fraction(value), k)
        elif isinstance(value, str):
            try:
                frac = Fraction(value.strip().replace("_", ""))
            except ValueError as exc:
                raise ValueError(f"cannot parse {value!r} as a real number") from exc
            c = _fraction_components(frac, k)
        else:
            raise TypeError(f"cannot convert {type(value).__name__} to ExReal")
        self._c = _check(c)
        self.prec = prec

    @classmethod
    def _wrap(cls, c: np.ndarray, prec: str) -> "ExReal":
        obj = object.__new__(cls)
        obj._c = _check(c)
        obj.prec = prec
        return obj

    @classmethod
    def from_components(cls, comps, prec: str | None = None) -> "ExReal":
        """Build from raw components, renormalizing them."""
        arr = np.asarray(comps, dtype=float).copy()
        prec = prec or _prec_of(arr.size)
        return cls._wrap(K.distill(arr, arr.size, NCOMP[prec]), prec)

    # ------------------------------------------------------------------ access
    @property
    def components(self) -> tuple:
        return tuple(float(v) for v in self._c)

    @property
    def k(self) -> int:
        return self._c.size

    def to_fraction(self) -> Fraction:
        return sum((Fraction(float(v)) for v in self._c), Fraction(0))

    def __float__(self) -> float:
        return float(self._c[0] + self._c[1])

    def __bool__(self) -> bool:
        return bool(self._c[0] != 0.0)

    def sign(self) -> int:
        c0 = float(self._c[0])
        return (c0 > 0) - (c0 < 0)

    def ulp(self) -> float:
        """Precision unit at this magnitude."""
        return abs(float(self._c[0])) * EPS[self.prec]

    # --------------------------------------------------------------- coercion
    def _coerce(self, other):
        if isinstance(other, ExReal):
            return other
        if isinstance(other, (int, float, Rational)):
            return ExReal(other, self.prec)
        return None

    @staticmethod
    def _k2(a: "ExReal", b: "ExReal"):
        k = max(a._c.size, b._c.size)
        return k, _prec_of(k)

    # ------------------------------------------------------------- arithmetic
    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        k, p = self._k2(self, o)
        return ExReal._wrap(K.add(self._c, o._c, k), p)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        k, p = self._k2(self, o)
        return ExReal._wrap(K.sub(self._c, o._c, k), p)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        if isinstance(other, float):
            return ExReal._wrap(K.mul_double(self._c, other, self._c.size), self.prec)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        k, p = self._k2(self, o)
        return ExReal._wrap(K.mul(self._c, o._c, k), p)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if o._c[0] == 0.0:
            raise ZeroDivisionError("ExReal division by zero")
        k, p = self._k2(self, o)
        return ExReal._wrap(K.div(self._c, o._c, k), p)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __pow__(self, n):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return 1 / (self**-n)
        result = ExReal(1, self.prec)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __neg__(self):
        return ExReal._wrap(-self._c, self.prec)

    def __pos__(self):
        return self

    def __abs__(self):
        return -self if self._c[0] < 0 else self

    def ldexp(self, e: int) -> "ExReal":
        """Exact scaling by ``2**e``."""
        return ExReal._wrap(K.ldexp(self._c, e), self.prec)

    # ------------------------------------------------------------ comparison
    def _cmp(self, other) -> int:
        o = self._coerce(other)
        if o is None:
            raise TypeError(f"cannot compare ExReal with {type(other).__name__}")
        return (self - o).sign()

    def __eq__(self, other):
        if self._coerce(other) is None:
            return NotImplemented
        return self._cmp(other) == 0

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __hash__(self):
        return hash(self.to_fraction())

    # ------------------------------------------------------------ formatting
    def to_string(self, digits: int = 0) -> str:
        """Decimal scientific notation rounded to ``digits`` significant digits.

        ``digits=0`` gives the shortest text of at least 40 (dd) or 70 (qd)
        digits that parses back to the same components.
        """
        if digits:
            return self._decimal(digits)
        digits = 40 if self.prec == "dd" else 70
        while True:
            text = self._decimal(digits)
            if digits >= 800 or ExReal(text, self.prec)._c.tolist() == self._c.tolist():
                return text
            digits += 1 if digits < 100 else 20

    def _decimal(self, digits: int) -> str:
        frac = self.to_fraction()
        if frac == 0:
            return "0"
        with localcontext() as ctx:
            ctx.prec = digits
            d = Decimal(frac.numerator) / Decimal(frac.denominator)
        return f"{d:.{digits - 1}E}"

    def __str__(self):
        return self.to_string(32 if self.prec == "dd" else 64)

    def __repr__(self):
        return f"ExReal('{self.to_string()}', prec='{self.prec}')"

    def __format__(self, spec: str) -> str:
        if not spec:
            return str(self)
        return format(float(self), spec)

    def to_hex(self) -> str:
        """Bit-exact dump: precision tag followed by hex-float components."""
        return self.prec + ":" + ",".join(float(v).hex() for v in self._c)

    @classmethod
    def from_hex(cls, text: str) -> "ExReal":
        prec, _, body = text.partition(":")
        if prec not in NCOMP:
            raise ValueError(f"bad hex dump {text!r}")
        comps = [float.fromhex(s) for s in body.split(",")]
        if len(comps) != NCOMP[prec]:
            raise ValueError(f"expected {NCOMP[prec]} components in {text!r}")
        return cls._wrap(np.array(comps), prec)


def as_exreal(x, prec: str | None = None) -> ExReal:
    if isinstance(x, ExReal) and (prec is None or x.prec == prec):
        return x
    return ExReal(x, prec)


class ExComplex:
    """Complex number with ``ExReal`` real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0, prec: str | None = None):
        if isinstance(re, complex):
            re, im = re.real, re.imag
        if prec is None:
            precs = [v.prec for v in (re, im) if isinstance(v, ExReal)]
            prec = max(precs, key=NCOMP.get) if precs else DEFAULT_PREC
        self.re = as_exreal(re, prec)
        self.im = as_exreal(im, prec)

    @property
    def prec(self) -> str:
        return _prec_of(max(self.re.k, self.im.k))

    def _coerce(self, other):
        if isinstance(other, ExComplex):
            return other
        if isinstance(other, (ExReal, int, float, Rational)):
            return ExComplex(other, 0, self.prec)
        if isinstance(other, complex):
            return ExComplex(other.real, other.imag, self.prec)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return ExComplex(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return ExComplex(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        if isinstance(other, (ExReal, int, float, Rational)):
            return ExComplex(self.re * other, self.im * other)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        k = max(self.re.k, self.im.k, o.re.k, o.im.k)
        p = _prec_of(k)
        a = _stack(self.re, self.im, k)
        re = K.dot(a, _stack(o.re, -o.im, k), k)
        im = K.dot(a, _stack(o.im, o.re, k), k)
        return ExComplex(ExReal._wrap(re, p), ExReal._wrap(im, p))

    __rmul__ = __mul__

    def abs2(self) -> ExReal:
        k = max(self.re.k, self.im.k)
        a = _stack(self.re, self.im, k)
        return ExReal._wrap(K.dot(a, a, k), _prec_of(k))

    def __abs__(self) -> ExReal:
        from .elementary import sqrt

        return sqrt(self.abs2())

    def __truediv__(self, other):
        if isinstance(other, (ExReal, int, float, Rational)):
            return ExComplex(self.re / other, self.im / other)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        d = o.abs2()
        if not d:
            raise ZeroDivisionError("ExComplex division by zero")
        return (self * o.conjugate()) / d

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __neg__(self):
        return ExComplex(-self.re, -self.im)

    def conjugate(self) -> "ExComplex":
        return ExComplex(self.re, -self.im)

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"ExComplex({self.re!r}, {self.im!r})"

    def __str__(self):
        return f"({self.re} + {self.im}i)"


def _stack(a: ExReal, b: ExReal, k: int) -> np.ndarray:
    out = np.zeros((2, k))
    out[0, : a.k] = a._c
    out[1, : b.k] = b._c
    return out
