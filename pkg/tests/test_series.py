import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from expsplit.canonical import tilde_field
from expsplit.hiprec import ExReal, sqrt
from expsplit.poly import PolyQ
from expsplit.series import (
    SeriesPair,
    gevrey_diagnostic,
    log_abs_phi,
    phi_coefficients,
    slow_manifold_series,
)

S = sp.Symbol("s")


def _inner_residual_coeffs(sp_pair: SeriesPair):
    """Coefficients of the inner system residual, both equations multiplied by (1 - s z)^κ."""
    k = sp_pair.kappa
    y = sum(sp.Rational(c) * S**a for a, c in enumerate(sp_pair.y_coeffs))
    z = sum(sp.Rational(c) * S**a for a, c in enumerate(sp_pair.z_coeffs))
    w = (1 - S * z) ** k
    r1 = sp.expand(w * ((k - 1) * S**2 * sp.diff(y, S) + k * S * y) + z)
    r2 = sp.expand(w * ((k - 1) * S**2 * sp.diff(z, S) - 1 + k * S * z) - y)
    return [sp.Poly(r, S).all_coeffs()[::-1] for r in (r1, r2)]


def test_phi_examples_kappa2():
    p = phi_coefficients(2, 4)
    assert (p.y_coeffs[0], p.z_coeffs[0]) == (-1, 0)
    assert (p.y_coeffs[1], p.z_coeffs[1]) == (0, 2)
    assert (p.y_coeffs[2], p.z_coeffs[2]) == (10, 0)
    assert all(isinstance(c, Fraction) for c in p.y_coeffs + p.z_coeffs)


@pytest.mark.parametrize("kappa,N", [(2, 12), (3, 10), (4, 8), (5, 6), (8, 5)])
def test_phi_residual_valuation(kappa, N):
    for coeffs in _inner_residual_coeffs(phi_coefficients(kappa, N)):
        padded = coeffs + [0] * (N + 1 - len(coeffs))
        assert all(c == 0 for c in padded[: N + 1])


@settings(max_examples=15)
@given(st.integers(2, 8), st.integers(1, 25), st.integers(1, 15))
def test_phi_prefix_exact(kappa, N, extra):
    a = phi_coefficients(kappa, N)
    b = phi_coefficients(kappa, N + extra)
    assert b.y_coeffs[: N + 1] == a.y_coeffs and b.z_coeffs[: N + 1] == a.z_coeffs


def test_phi_rejects_bad_arguments():
    with pytest.raises(ValueError):
        phi_coefficients(1, 5)
    with pytest.raises(ValueError):
        phi_coefficients(2, 0)


def test_log_abs_phi_exact_for_huge_values():
    big = Fraction(10**400)
    assert log_abs_phi(big, Fraction(0)) == pytest.approx(400 * math.log(10))
    assert log_abs_phi(Fraction(0), Fraction(0)) == -math.inf


@pytest.mark.parametrize("kappa", [2, 8])
def test_gevrey_slope_band(kappa):
    rep = gevrey_diagnostic(phi_coefficients(kappa, 80), 40, 80)
    assert rep.heuristic
    assert 0.9 <= rep.slope <= 1.1, f"slope {rep.slope:.4f}"


@pytest.mark.parametrize("kappa", [2, 3, 5, 8])
def test_factorial_growth_rate(kappa):
    # |φ_α| ~ Γ(α) c^α α^b: recover c from a three-term fit well past the transient
    sp_pair = phi_coefficients(kappa, 160)
    al = [a for a in range(40, 161) if sp_pair.y_coeffs[a] or sp_pair.z_coeffs[a]]
    L = np.array([log_abs_phi(sp_pair.y_coeffs[a], sp_pair.z_coeffs[a]) - math.lgamma(a)
                  for a in al])
    A = np.c_[np.ones(len(al)), al, np.log(al)]
    coef = np.linalg.lstsq(A, L, rcond=None)[0]
    assert math.exp(coef[1]) == pytest.approx(kappa - 1, rel=1e-2)


def test_gevrey_geometric_series_slope_zero():
    N = 60
    g = tuple(Fraction(1, 2**a) for a in range(N + 1))
    zero = tuple(Fraction(0) for _ in range(N + 1))
    rep = gevrey_diagnostic(SeriesPair(2, N, g, zero), 20, 60)
    assert abs(rep.slope) < 0.05
    assert rep.values[-1] == pytest.approx(-math.log(2), abs=1e-12)


def test_gevrey_needs_ten_points():
    p = phi_coefficients(2, 30)
    with pytest.raises(ValueError):
        gevrey_diagnostic(p, 1, 8)
    with pytest.raises(ValueError):
        gevrey_diagnostic(p, 1, 31)
    # zero entries are skipped: only α = 1..7 are usable here
    with pytest.raises(ValueError):
        gevrey_diagnostic(SeriesPair(2, 15, (Fraction(1),) * 8 + (Fraction(0),) * 8,
                                     (Fraction(0),) * 16), 1, 15)


# ---------------------------------------------------------------- slow manifold


@pytest.mark.parametrize("text", ["-f^2+1", "-f^3+f", "-f^4+5f^2-4"])
def test_slow_manifold_starts_at_two_kappa_minus_one(text):
    Q = PolyQ.parse(text)
    k = Q.kappa
    sm = slow_manifold_series(Q, 3 * (k - 1))
    assert min(sm.alphas()) >= 2 * (k - 1)
    assert all(a % (k - 1) == 0 for a in sm.alphas())
    with pytest.raises(ValueError):
        slow_manifold_series(Q, 2 * (k - 1) - 1)


def _invariance_residual(Q, sm, x, eps):
    e1 = eps ** (Q.kappa - 1)
    my, mz = sm.evaluate(x, eps)
    dy, dz = sm.evaluate(x, eps, deriv=1)
    fx, fy, fz = tilde_field(Q, e1, (x, my, mz))
    return max(abs(float(fy - dy * fx)), abs(float(fz - dz * fx)))


@pytest.mark.parametrize("N", [4, 6])
def test_slow_manifold_residual_order(N):
    Q = PolyQ.parse("-f^2+1")
    sm = slow_manifold_series(Q, N)
    x = ExReal("0.3", "qd")
    eps = [ExReal(Fraction(1, 100), "qd"), sqrt(ExReal(Fraction(1, 10**5), "qd")),
           ExReal(Fraction(1, 1000), "qd")]
    res = [_invariance_residual(Q, sm, x, e) for e in eps]
    slope = np.polyfit(np.log([float(e) for e in eps]), np.log(res), 1)[0]
    assert abs(slope - (N + 1)) <= 0.2, f"slope {slope:.3f}"


@pytest.mark.parametrize("kappa,text", [(2, "-f^2+1"), (3, "-f^3+f"), (4, "-f^4+5f^2-4")])
def test_raw_head_matches_inner_series(kappa, text):
    Q = PolyQ.parse(text)
    n = 5
    sm = slow_manifold_series(Q, n * (kappa - 1))
    phi = phi_coefficients(kappa, n)
    for i in range(n + 1):
        assert sm.raw_head(i) == (phi.y_coeffs[i], phi.z_coeffs[i])


def _tilde_inner_heads(kappa, n):
    """Top coefficients after the normal-form map, from the homogeneous model Q = -x^κ.

    Raw manifold y = x^κ Y(s), z = x^κ Z(s) with s = e1 x^{κ-1}; the map sends
    s to s̃ = s (1 - κ s² Y)^{κ-1} and the fibre to x̃^κ (Ỹ, Z̃)(s̃).
    """
    phi = phi_coefficients(kappa, n)
    order = n + 1
    Y = sum(sp.Rational(c) * S**a for a, c in enumerate(phi.y_coeffs))
    Z = sum(sp.Rational(c) * S**a for a, c in enumerate(phi.z_coeffs))
    k = kappa

    def trunc(e):
        return sp.series(e, S, 0, order).removeO()

    g = 1 - k * S**2 * Y
    Yt = trunc((Y + 1 - sp.Rational(k, 2) * S * Z) / g**k)
    Zt = trunc((Z - k * S) / g**k)
    # invert s̃ = s g(s)^{κ-1} by fixed point: s = s̃ g(s)^{1-κ}
    T = sp.Symbol("t")
    sol = T
    for _ in range(order):
        sol = sp.series((T * g.subs(S, sol) ** (1 - k)), T, 0, order).removeO()
    heads = []
    for e in (Yt, Zt):
        comp = sp.series(e.subs(S, sol), T, 0, order).removeO()
        heads.append([sp.Rational(comp.coeff(T, i)) for i in range(order)])
    return list(zip(*heads))


@pytest.mark.parametrize("kappa,text", [(2, "-f^2+1"), (3, "-f^3+f")])
def test_inner_head_after_normal_form_map(kappa, text):
    n = 4
    sm = slow_manifold_series(PolyQ.parse(text), n * (kappa - 1))
    expected = _tilde_inner_heads(kappa, n)
    for i in range(2, n + 1):
        alpha = i * (kappa - 1)
        got = sm.inner_head(alpha)
        assert (sp.Rational(got[0]), sp.Rational(got[1])) == expected[i]


def test_inner_head_known_values():
    sm = slow_manifold_series(PolyQ.parse("-f^2+1"), 4)
    assert sm.inner_head(2) == (8, 0)
    assert sm.inner_head(3) == (0, -48)


def test_chart1_identity():
    # m_{1,α}(ε₁) = ε₁^{κ+α} m_{2,α}(1/ε₁) as rational functions
    Q = PolyQ.parse("-f^3+f")
    sm = slow_manifold_series(Q, 6)
    e = sp.Symbol("e")
    for alpha in sm.alphas():
        py, pz = sm.m_coeffs[alpha]
        cy, cz = sm.chart1_coefficient(alpha)
        for p, c in ((py, cy), (pz, cz)):
            lhs = sum(sp.Rational(v) * e**i for i, v in enumerate(c))
            rhs = sp.expand(e ** (3 + alpha) * sum(sp.Rational(v) * e**-i
                                                   for i, v in enumerate(p)))
            assert sp.expand(lhs - rhs) == 0
