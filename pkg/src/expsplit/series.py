"""Exact formal series: inner saddle-node coefficients and the slow manifold.

All coefficients are ``Fraction`` values; nothing here rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .poly import PolyQ

__all__ = [
    "SeriesPair",
    "GevreyReport",
    "SlowManifoldSeries",
    "phi_coefficients",
    "gevrey_diagnostic",
    "slow_manifold_series",
    "log_abs_phi",
]

ZERO = Fraction(0)


@dataclass(frozen=True)
class SeriesPair:
    """Coefficients (y_α, z_α), α = 0..N, of the inner formal series in s."""

    kappa: int
    N: int
    y_coeffs: tuple
    z_coeffs: tuple


def phi_coefficients(kappa: int, N: int) -> SeriesPair:
    """Formal solution of the inner system in s = r₁^{κ-1}.

    Solves order by order

        (κ-1) s² y' = -(1 - s z)^{-κ} z - κ s y
        (κ-1) s² z' =  (1 - s z)^{-κ} y + 1 - κ s z

    where B = (1 - s z)^{-κ} is expanded with the power recurrence
    n B_n = Σ_i w_i (n - i + κ i) B_{n-i}, w = s z.  At order n the
    unknowns enter only through B_0 = 1, so each step is explicit.
    """
    if kappa < 2 or N < 1:
        raise ValueError("need kappa >= 2 and N >= 1")
    y = [Fraction(-1)]
    z = [ZERO]
    B = [Fraction(1)]
    for n in range(1, N + 1):
        # w_i = z_{i-1}
        acc = ZERO
        for i in range(1, n + 1):
            wi = z[i - 1]
            if wi:
                acc += wi * (n - i + kappa * i) * B[n - i]
        B.append(acc / n)
        lin = (kappa - 1) * (n - 1) + kappa
        zn = -lin * y[n - 1]
        yn = lin * z[n - 1]
        for i in range(1, n + 1):
            if B[i]:
                zn -= B[i] * z[n - i]
                yn -= B[i] * y[n - i]
        z.append(zn)
        y.append(yn)
    return SeriesPair(kappa, N, tuple(y), tuple(z))


def log_abs_phi(y: Fraction, z: Fraction) -> float:
    """log sqrt(y² + z²) computed from exact integers (no overflow)."""
    r = y * y + z * z
    if r == 0:
        return -math.inf
    return 0.5 * (math.log(r.numerator) - math.log(r.denominator))


@dataclass(frozen=True)
class GevreyReport:
    """Least-squares fit of log|φ_α|^{1/α} against log α.

    A slope near 1 indicates factorial growth, i.e. a divergent series.
    This is numerical evidence only (``heuristic`` is always true).
    """

    alphas: tuple
    values: tuple
    slope: float
    intercept: float
    r_squared: float
    heuristic: bool = True


def gevrey_diagnostic(sp: SeriesPair, alpha_min: int, alpha_max: int) -> GevreyReport:
    if alpha_max > sp.N:
        raise ValueError(f"alpha_max={alpha_max} exceeds series order {sp.N}")
    alphas, values = [], []
    for a in range(max(alpha_min, 1), alpha_max + 1):
        la = log_abs_phi(sp.y_coeffs[a], sp.z_coeffs[a])
        if math.isfinite(la):
            alphas.append(a)
            values.append(la / a)
    if len(alphas) < 10:
        raise ValueError(f"only {len(alphas)} nonzero coefficients in range; need 10")
    X = np.log(np.array(alphas, dtype=float))
    V = np.array(values)
    slope, intercept = np.polyfit(X, V, 1)
    fit = slope * X + intercept
    ss_res = float(np.sum((V - fit) ** 2))
    ss_tot = float(np.sum((V - V.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return GevreyReport(tuple(alphas), tuple(values), float(slope), float(intercept), r2)


# --------------------------------------------------------------------------
# Exact polynomials in x (ascending Fraction lists) and truncated series in e.


def _padd(p, q):
    n = max(len(p), len(q))
    return [(p[i] if i < len(p) else ZERO) + (q[i] if i < len(q) else ZERO)
            for i in range(n)]


def _pscale(p, c):
    return [c * v for v in p]


def _pmul(p, q):
    if not p or not q:
        return []
    out = [ZERO] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


def _pder(p):
    return [i * p[i] for i in range(1, len(p))]


def _ptrim(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def _smul(A, B, n):
    """Product of series A, B (lists of polys) truncated after order n."""
    out = [[] for _ in range(n + 1)]
    for i, a in enumerate(A[: n + 1]):
        if not a:
            continue
        for j, b in enumerate(B[: n + 1 - i]):
            if b:
                out[i + j] = _padd(out[i + j], _pmul(a, b))
    return out


def _sadd(A, B):
    n = max(len(A), len(B))
    return [_padd(A[i] if i < len(A) else [], B[i] if i < len(B) else []) for i in range(n)]


def _sscale(A, c):
    return [_pscale(a, c) for a in A]


def _sshift(A, k, n):
    """Multiply by e^k, truncating after order n."""
    return ([[] for _ in range(k)] + list(A))[: n + 1]


def _sder(A):
    return [_pder(a) for a in A]


def _compose(F, delta, n):
    """F(x + delta(x, e), e) for a series ``delta`` starting at order ≥ 1.

    Uses the finite Taylor expansion Σ_k ∂^k F / k! · delta^k.
    """
    out = [list(f) for f in F]
    out += [[] for _ in range(n + 1 - len(out))]
    power = [[Fraction(1)]] + [[] for _ in range(n)]
    deriv = F
    fact = 1
    for k in range(1, n + 1):
        power = _smul(power, delta, n)
        if not any(power):
            break
        deriv = _sder(deriv)
        fact *= k
        out = _sadd(out, _sscale(_smul(deriv, power, n), Fraction(1, fact)))
    return [_ptrim(p) for p in out[: n + 1]]


def _poly_compose_series(coeffs, U, n):
    """Σ c_k U^k for a univariate polynomial with rational coefficients c_k."""
    out = [[] for _ in range(n + 1)]
    for c in reversed(coeffs):
        out = _smul(out, U, n)
        out[0] = _padd(out[0], [Fraction(c)])
    return out


@dataclass(frozen=True)
class SlowManifoldSeries:
    """Formal slow manifold (ỹ₂, z̃₂) = Σ_α m_{2,α}(x̃₂) ε^α in normal-form coordinates.

    ``m_coeffs[α] = (py, pz)`` holds ascending rational coefficients in x̃₂;
    only α that are multiples of κ-1 occur.  ``raw`` holds the same manifold
    in the untransformed coordinates, indexed by the power of ε^{κ-1}.
    """

    kappa: int
    N: int
    poly: PolyQ
    m_coeffs: dict
    raw: tuple = field(repr=False, default=())

    def alphas(self):
        return sorted(self.m_coeffs)

    def evaluate(self, x, eps, deriv: int = 0):
        """Numeric (ỹ₂, z̃₂) or their x-derivative at ``x`` for given ε."""
        ys = x * 0
        zs = x * 0
        for alpha in sorted(self.m_coeffs, reverse=True):
            py, pz = self.m_coeffs[alpha]
            for _ in range(deriv):
                py, pz = _pder(py), _pder(pz)
            w = eps**alpha
            ys = ys + w * _peval(py, x)
            zs = zs + w * _peval(pz, x)
        return ys, zs

    def chart1_coefficient(self, alpha: int):
        """m_{1,α}(ε₁) = ε₁^{κ+α} m_{2,α}(1/ε₁) as ascending coefficient pairs."""
        py, pz = self.m_coeffs.get(alpha, ([], []))
        top = self.kappa + alpha
        out = []
        for p in (py, pz):
            if len(p) - 1 > top:
                raise ValueError(f"degree of m_{{2,{alpha}}} exceeds κ+α")
            out.append([p[top - i] if 0 <= top - i < len(p) else ZERO
                        for i in range(top + 1)])
        return tuple(out)

    def inner_head(self, alpha: int):
        """m_{1,α}(0): the x^{κ+α} coefficients of m_{2,α}."""
        cy, cz = self.chart1_coefficient(alpha)
        return cy[0], cz[0]

    def raw_head(self, n: int):
        """Leading x^{κ+n(κ-1)} coefficients of the untransformed order-n terms."""
        top = self.kappa + n * (self.kappa - 1)
        py, pz = self.raw[n]
        get = lambda p: p[top] if top < len(p) else ZERO  # noqa: E731
        if max(len(py), len(pz)) - 1 > top:
            raise ValueError("raw degree exceeds κ + n(κ-1)")
        return get(py), get(pz)


def _peval(p, x):
    acc = x * 0
    for c in reversed(p):
        acc = acc * x + (c if isinstance(x, Fraction) else _num(c, x))
    return acc


def _num(c: Fraction, like):
    from .hiprec import ExReal

    if isinstance(like, ExReal):
        return ExReal(c, like.prec)
    return float(c)


def slow_manifold_series(Q: PolyQ, N: int) -> SlowManifoldSeries:
    """Formal slow manifold of the canonical family up to ε^N.

    The invariance equation of the polynomial fast-time system

        e Q(x - e z) (y', z') = (z, -y + Q(x - e z)),   e = ε^{κ-1},

    is solved order by order in e (each order is explicit because the
    linear part acts through the invertible rotation (y, z) ↦ (z, -y)).
    The result is then pushed through the normal-form map and
    re-parametrized by x̃₂, all in exact arithmetic.
    """
    k = Q.kappa
    if N < 2 * (k - 1):
        raise ValueError(f"N must be at least 2(κ-1) = {2 * (k - 1)}")
    n = N // (k - 1)
    qc = list(Q.coefficients)
    Qx = _ptrim(qc)
    dQx = _pder(Qx)
    Y = [list(Qx)] + [[] for _ in range(n)]
    Z = [[] for _ in range(n + 1)]
    for order in range(1, n + 1):
        # U = x - e Z  (Z known up to order-1, higher terms do not matter here)
        U = [[ZERO, Fraction(1)]] + [_pscale(Z[i - 1], -1) for i in range(1, n + 1)]
        Qu = _poly_compose_series(qc, U, n)
        Z[order] = _ptrim(_smul(Qu, _sder(Y), order - 1)[order - 1])
        Y[order] = _ptrim(_padd(Qu[order],
                                _pscale(_smul(Qu, _sder(Z), order - 1)[order - 1], -1)))
    # normal-form coordinates as series in e with coefficients in x
    dQY = _smul([dQx], Y, n)
    Xt_delta = _sshift(dQY, 2, n)  # x̃ - x
    Yt = _sadd(_sadd(Y, [_pscale(Qx, -1)]), _sscale(_sshift(_smul([dQx], Z, n), 1, n),
                                                     Fraction(1, 2)))
    Zt = _sadd(Z, _sscale(_sshift([_pmul(dQx, Qx)], 1, n), -1))
    # solve x = ξ - (x̃ - x)(x) for x(ξ) as ξ + delta(ξ, e)
    delta = [[] for _ in range(n + 1)]
    for _ in range(n // 2 + 1):
        delta = _sscale(_compose(Xt_delta, delta, n), -1)
    Ym = _compose(Yt, delta, n)
    Zm = _compose(Zt, delta, n)
    m = {}
    for order in range(n + 1):
        py, pz = _ptrim(Ym[order]), _ptrim(Zm[order])
        if py or pz:
            m[order * (k - 1)] = (tuple(py), tuple(pz))
    raw = tuple((tuple(_ptrim(Y[i])), tuple(_ptrim(Z[i]))) for i in range(n + 1))
    return SlowManifoldSeries(k, N, Q, m, raw)
