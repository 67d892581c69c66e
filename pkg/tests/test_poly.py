import math
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from expsplit.hiprec import ExComplex, ExReal, pi
from expsplit.poly import (
    P_scaled,
    PolyError,
    PolyQ,
    blowup_time_formula,
    evaluate,
    real_roots,
    residue_sum,
)
from expsplit.selfcheck import random_roots

MICHELSEN = PolyQ.parse("-f^2+1")
CUBIC = PolyQ.parse("-f^3+f")


def poly_from_seed(seed: int, kappa: int) -> PolyQ:
    rng = random.Random(seed)
    roots = [Fraction(r).limit_denominator(10**6) for r in random_roots(rng, kappa)]
    return PolyQ.from_roots(roots)


# ----------------------------------------------------------------- parsing
@pytest.mark.parametrize("text,a", [
    ("-f^2+1", (1, 0)),
    ("Q = -f^3 + 1/2 f + 1", (1, Fraction(1, 2), 0)),
    ("-f**3+f", (0, 1, 0)),
    ("-f^4 - 2.5f^2 + 3/4", (Fraction(3, 4), 0, Fraction(-5, 2), 0)),
    ("1 - f^2", (1, 0)),
])
def test_parse(text, a):
    assert PolyQ.parse(text).a == tuple(Fraction(v) for v in a)


@pytest.mark.parametrize("text", ["2f^2+1", "-2f^2+1", "f^3", "-f^2 1", "", "-f^1", "-g^2+1"])
def test_parse_rejects(text):
    with pytest.raises(PolyError):
        PolyQ.parse(text)


def test_leading_coefficient_message():
    with pytest.raises(PolyError, match="leading coefficient must be exactly -1"):
        PolyQ.parse("-2f^2+1")


@given(st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=50),
                min_size=2, max_size=8))
def test_str_parse_round_trip(a):
    Q = PolyQ(tuple(a))
    assert PolyQ.parse(str(Q)) == Q


# -------------------------------------------------------------- evaluation
def test_eval_examples():
    assert evaluate(MICHELSEN, ExReal(0, "qd")) == 1
    assert evaluate(MICHELSEN, ExReal(1, "qd"), 1) == -2
    assert evaluate(CUBIC, ExReal(0, "qd"), 1) == 1
    assert evaluate(CUBIC, 2.0, 2) == -12.0
    assert evaluate(CUBIC, 0.5, 3) == -6.0


def test_eval_complex_kinds_agree():
    x = complex(0.3, -1.2)
    z = ExComplex(ExReal(0.3, "qd"), ExReal(-1.2, "qd"))
    for order in (0, 1, 2):
        got = complex(evaluate(CUBIC, z, order))
        assert abs(got - evaluate(CUBIC, x, order)) < 1e-14


def test_p_scaled_examples():
    x = ExReal("0.7", "qd")
    assert P_scaled(CUBIC, x, 0) == -(x**3)
    assert P_scaled(MICHELSEN, ExReal(1, "qd"), ExReal(1, "qd")) == 0


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=1e-3, max_value=1.0),
       st.integers(0, 50))
def test_p_scaled_homogeneity(x, eps, seed):
    Q = poly_from_seed(seed, 2 + seed % 5)
    x2, e = ExReal(x, "qd"), ExReal(eps, "qd")
    lhs = P_scaled(Q, x2 * e, e)
    rhs = e ** Q.kappa * evaluate(Q, x2)
    scale = max(abs(float(rhs)), float(e) ** Q.kappa * 1e-3)
    assert abs(float(lhs - rhs)) <= 1e-55 * scale


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=1e-3, max_value=1.0),
       st.floats(min_value=0.1, max_value=10), st.integers(0, 50))
def test_p_scaled_is_homogeneous_in_x_and_eps(x, eps, r, seed):
    Q = poly_from_seed(seed, 2 + seed % 5)
    x_, e_, r_ = ExReal(x, "qd"), ExReal(eps, "qd"), ExReal(r, "qd")
    lhs = P_scaled(Q, r_ * x_, r_ * e_)
    rhs = r_ ** Q.kappa * P_scaled(Q, x_, e_)
    scale = max(abs(float(rhs)), float(r_ * e_) ** Q.kappa)
    assert abs(float(lhs - rhs)) <= 1e-55 * scale


# -------------------------------------------------------------------- roots
def test_roots_michelsen():
    rs = real_roots(MICHELSEN)
    assert rs.valid
    assert [float(r) for r in rs.roots] == [1.0, -1.0]
    assert [float(d) for d in rs.dQ] == [-2.0, 2.0]


def test_roots_cubic():
    rs = real_roots(CUBIC)
    assert rs.valid
    assert [float(r) for r in rs.roots] == [1.0, 0.0, -1.0]
    # oracle: Q' = -3f^2 + 1 at the factored roots
    assert [float(d) for d in rs.dQ] == [-3 * r * r + 1 for r in (1, 0, -1)]


def test_double_root_rejected():
    rs = real_roots(PolyQ.parse("-f^2+2f-1"))
    assert not rs.valid
    assert any("simplicity violated near f=1" in f for f in rs.failures)
    with pytest.raises(PolyError):
        blowup_time_formula(rs, 1)


def test_complex_pair_rejected():
    rs = real_roots(PolyQ.parse("-f^3-f"))
    assert not rs.valid
    assert any("complex pair" in f for f in rs.failures)


@given(st.integers(0, 10**6), st.integers(2, 8))
def test_root_set_invariants(seed, kappa):
    Q = poly_from_seed(seed, kappa)
    rs = real_roots(Q)
    assert rs.valid
    roots = rs.roots
    assert all(a > b for a, b in zip(roots, roots[1:]))
    signs = [d.sign() for d in rs.dQ]
    assert signs[0] < 0
    assert all(s1 == -s2 for s1, s2 in zip(signs, signs[1:]))
    assert all(abs(float(evaluate(Q, r))) <= 1e-55 for r in roots)
    for j in range(1, kappa):
        assert blowup_time_formula(rs, j) > 0


# --------------------------------------------------------- residue formulas
def test_blowup_time_examples():
    assert blowup_time_formula(real_roots(MICHELSEN), 1) == pi("qd") / 2
    rs = real_roots(CUBIC)
    # hand summation: 1/Q'(1) = -1/2, 1/Q'(0) = 1
    assert blowup_time_formula(rs, 1) == pi("qd") / 2
    assert blowup_time_formula(rs, 2) == abs(pi("qd") * (Fraction(-1, 2) + 1))
    assert residue_sum(rs, 2) == Fraction(1, 2)


def test_euler_jacobi_random_instances():
    rng = random.Random(7)
    worst = 0.0
    for kappa in range(2, 9):
        for _ in range(100):
            roots = [Fraction(r).limit_denominator(10**6) for r in random_roots(rng, kappa)]
            rs = real_roots(PolyQ.from_roots(roots))
            worst = max(worst, abs(float(residue_sum(rs, kappa))))
    assert worst <= 1e-30


def test_residue_sum_index_range():
    rs = real_roots(CUBIC)
    with pytest.raises(PolyError):
        residue_sum(rs, 0)
    with pytest.raises(PolyError):
        residue_sum(rs, 4)


def test_dd_precision_roots():
    rs = real_roots(PolyQ.parse("-f^3 + 2f + 1/7"), "dd")
    assert rs.valid and rs.prec == "dd"
    assert all(r.prec == "dd" for r in rs.roots)
    assert all(abs(float(evaluate(rs.poly, r))) < 1e-28 for r in rs.roots)


def test_odd_detection():
    assert CUBIC.is_odd()
    assert not MICHELSEN.is_odd()
    assert not PolyQ.parse("-f^3+f+1").is_odd()
    assert math.isclose(float(blowup_time_formula(real_roots(CUBIC), 1)), math.pi / 2)
