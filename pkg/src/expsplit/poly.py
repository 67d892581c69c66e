"""The polynomial Q(f) = -f^κ + Σ a_α f^α, its real roots and residue sums.

Coefficients are exact ``Fraction`` values so that exact series code and the
floating point modules share one definition of Q.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .hiprec import ExComplex, ExReal, as_exreal, pi

__all__ = [
    "PolyError",
    "PolyQ",
    "RootSet",
    "evaluate",
    "real_roots",
    "residue_sum",
    "blowup_time_formula",
    "P_scaled",
]


class PolyError(ValueError):
    """Malformed polynomial input or an invalid root set."""


_TERM = re.compile(
    r"""\s*(?P<sign>[+-])?\s*
        (?P<coef>\d+(?:\.\d*)?(?:/\d+)?|\.\d+)?\s*\*?\s*
        (?P<var>f(?:\s*(?:\^|\*\*)\s*(?P<pow>\d+))?)?\s*""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class PolyQ:
    """Q(f) = -f^κ + a[κ-1] f^(κ-1) + ... + a[0].

    Parameters
    ----------
    a : sequence of rationals
        Lower coefficients a_0 ... a_{κ-1}; κ is ``len(a)``.
    """

    a: tuple

    def __post_init__(self):
        a = tuple(Fraction(v) for v in self.a)
        if len(a) < 2:
            raise PolyError("degree κ must be at least 2")
        object.__setattr__(self, "a", a)

    @property
    def kappa(self) -> int:
        return len(self.a)

    @property
    def coefficients(self) -> tuple:
        """All coefficients c_0 ... c_κ, with c_κ = -1."""
        return self.a + (Fraction(-1),)

    @classmethod
    def parse(cls, text: str) -> "PolyQ":
        """Parse e.g. ``"-f^3 + 1/2 f + 1"``; the leading term must be ``-f^κ``."""
        body = text.strip()
        if body.lower().startswith("q"):
            body = body.split("=", 1)[-1]
        body = body.strip()
        if not body:
            raise PolyError("empty polynomial")
        terms: dict[int, Fraction] = {}
        pos = 0
        while pos < len(body):
            m = _TERM.match(body, pos)
            if m is None or m.end() == pos or not (m["coef"] or m["var"]):
                raise PolyError(f"cannot parse polynomial near {body[pos:]!r}")
            if pos > 0 and not m["sign"]:
                raise PolyError(f"missing operator before {body[pos:]!r}")
            coef = Fraction(m["coef"]) if m["coef"] else Fraction(1)
            if m["sign"] == "-":
                coef = -coef
            power = 0
            if m["var"]:
                power = int(m["pow"]) if m["pow"] else 1
            terms[power] = terms.get(power, Fraction(0)) + coef
            pos = m.end()
        terms = {p: c for p, c in terms.items() if c != 0}
        if not terms:
            raise PolyError("polynomial is identically zero")
        kappa = max(terms)
        if terms[kappa] != -1:
            raise PolyError(
                f"leading coefficient must be exactly -1, got {terms[kappa]} "
                "(rescaling Q would change the blowup times)"
            )
        return cls(tuple(terms.get(p, Fraction(0)) for p in range(kappa)))

    @classmethod
    def from_roots(cls, roots) -> "PolyQ":
        """Q(f) = -Π (f - r) with exact rational arithmetic."""
        coef = [Fraction(-1)]  # ascending powers
        for r in roots:
            r = Fraction(r)
            new = [Fraction(0)] * (len(coef) + 1)
            for i, c in enumerate(coef):
                new[i + 1] += c
                new[i] -= r * c
            coef = new
        return cls(tuple(coef[:-1]))

    def derivative_coefficients(self, order: int = 1) -> tuple:
        c = list(self.coefficients)
        for _ in range(order):
            c = [i * c[i] for i in range(1, len(c))]
        return tuple(c)

    def is_odd(self) -> bool:
        return all(c == 0 for c in self.a[0::2]) if self.kappa % 2 else False

    def __str__(self) -> str:
        parts = []
        for p in range(self.kappa, -1, -1):
            c = self.coefficients[p]
            if c == 0:
                continue
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            if p == 0:
                body = str(mag)
            else:
                var = "f" if p == 1 else f"f^{p}"
                body = var if mag == 1 else f"{mag} {var}"
            parts.append(f"{sign} {body}" if parts else ("-" if c < 0 else "") + body)
        return " ".join(parts)

    def __call__(self, x, deriv_order: int = 0):
        return evaluate(self, x, deriv_order)


@lru_cache(maxsize=256)
def _coeffs_as(poly: PolyQ, order: int, kind: str) -> tuple:
    c = poly.derivative_coefficients(order)
    if kind == "float":
        return tuple(float(v) for v in c)
    return tuple(ExReal(v, kind) for v in c)


def _horner(coeffs, x):
    acc = coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * x + c
    return acc


def _kind(x) -> str:
    if isinstance(x, ExReal):
        return x.prec
    if isinstance(x, ExComplex):
        return x.prec
    return "float"


def evaluate(Q: PolyQ, x, deriv_order: int = 0):
    """Horner evaluation of Q, Q' or Q'' at ``x``.

    ``x`` may be a float, complex, ``ExReal`` or ``ExComplex``; the result has
    the same kind.
    """
    if deriv_order not in (0, 1, 2, 3):
        raise ValueError("deriv_order must be 0, 1, 2 or 3")
    coeffs = _coeffs_as(Q, deriv_order, _kind(x))
    if not coeffs:
        return x * 0
    if len(coeffs) == 1:
        return coeffs[0] + x * 0
    return _horner(coeffs, x)


def P_scaled(Q: PolyQ, x, eps, deriv_order: int = 0):
    """P(x, ε) = -x^κ + Σ ε^{κ-α} a_α x^α, or its x-derivative.

    Never forms x/ε, so ε = 0 is allowed.
    """
    kappa = Q.kappa
    kind = _kind(x)
    if kind == "float":
        e = float(eps) if not isinstance(eps, complex) else eps
    else:
        e = as_exreal(eps, kind)
    # ascending coefficients c_α = ε^{κ-α} a_α, c_κ = -1
    epow = [None] * (kappa + 1)
    epow[0] = 1 if kind == "float" else ExReal(1, kind)
    for i in range(1, kappa + 1):
        epow[i] = epow[i - 1] * e
    one = _coeffs_as(Q, 0, kind)
    coef = [epow[kappa - al] * one[al] for al in range(kappa)] + [one[kappa]]
    if deriv_order == 1:
        coef = [coef[i] * i for i in range(1, len(coef))]
    elif deriv_order != 0:
        raise ValueError("deriv_order must be 0 or 1")
    return _horner(coef, x)


@dataclass(frozen=True)
class RootSet:
    """Real roots q^1 > q^2 > ... > q^κ of Q with derivative values.

    ``roots[l-1]`` is q^l.  When ``valid`` is false, ``failures`` names each
    violated condition and the numeric fields may be incomplete.
    """

    poly: PolyQ
    roots: tuple
    dQ: tuple
    valid: bool
    failures: tuple = field(default_factory=tuple)
    prec: str = "qd"

    def q(self, l: int) -> ExReal:
        return self.roots[l - 1]

    def dq(self, l: int) -> ExReal:
        return self.dQ[l - 1]

    def require_valid(self) -> None:
        if not self.valid:
            raise PolyError("; ".join(self.failures) or "invalid root set")


def _newton_polish(Q: PolyQ, x0: float, prec: str, maxit: int = 80) -> ExReal:
    x = ExReal(x0, prec)
    last = math.inf
    for _ in range(maxit):
        d = evaluate(Q, x, 1)
        if not d:
            break
        step = evaluate(Q, x, 0) / d
        x = x - step
        s = abs(float(step))
        if s <= abs(float(x)) * 1e-70 or s == 0.0:
            break
        if s >= last and s < abs(float(x)) * 1e-60:
            break
        last = s
    return x


def real_roots(Q: PolyQ, prec: str = "qd") -> RootSet:
    """Find and validate the κ roots of Q.

    Companion-matrix eigenvalues give starting values, which are Newton
    polished in ``prec``.  A root counts as simple when |Q'(q)| exceeds
    ``1e-6 * max(1, max|coefficient|)``.
    """
    coeffs = [float(c) for c in Q.coefficients]
    scale = max(1.0, max(abs(c) for c in coeffs))
    tol_simple = 1e-6 * scale
    eig = np.roots(coeffs[::-1])
    dco = np.polynomial.polynomial.polyder(coeffs)
    failures = []
    candidates = []
    for z in sorted(eig, key=lambda v: (-v.real, v.imag)):
        dz = abs(np.polynomial.polynomial.polyval(z, dco))
        if dz <= tol_simple:
            msg = f"simplicity violated near f={z.real:.6g}"
            if msg not in failures:
                failures.append(msg)
            continue
        if abs(z.imag) > 1e-9 * max(1.0, abs(z)):
            if z.imag > 0:
                failures.append(
                    f"complex pair detected near f={z.real:.6g}±{abs(z.imag):.6g}i"
                )
            continue
        candidates.append(z.real)
    roots = tuple(_newton_polish(Q, r, prec) for r in sorted(candidates, reverse=True))
    dQ = tuple(evaluate(Q, r, 1) for r in roots)
    for r, d in zip(roots, dQ):
        if abs(float(d)) <= tol_simple:
            failures.append(f"simplicity violated near f={float(r):.6g}")
    for r1, r2 in zip(roots, roots[1:]):
        if not r1 > r2:
            failures.append(f"roots not distinct near f={float(r1):.6g}")
    if not failures and len(roots) != Q.kappa:
        failures.append(f"found {len(roots)} real roots, expected {Q.kappa}")
    return RootSet(Q, roots, dQ, not failures, tuple(failures), prec)


def residue_sum(rs: RootSet, j: int) -> ExReal:
    """Signed sum Σ_{l=1}^{j} 1/Q'(q^l)."""
    rs.require_valid()
    if not 1 <= j <= rs.poly.kappa:
        raise PolyError(f"j must lie in 1..{rs.poly.kappa}")
    total = ExReal(0, rs.prec)
    for l in range(1, j + 1):
        total = total + 1 / rs.dq(l)
    return total


def blowup_time_formula(rs: RootSet, j: int) -> ExReal:
    """T^j = |π Σ_{l=1}^{j} 1/Q'(q^l)|, the imaginary-time blowup time from p^j.

    For ``j = κ`` the full sum vanishes (Euler–Jacobi) and the result is ~0.
    """
    return abs(pi(rs.prec) * residue_sum(rs, j))
