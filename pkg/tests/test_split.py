import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expsplit.canonical import nft, nft_inverse
from expsplit.hiprec import ExReal, exp
from expsplit.poly import PolyQ, evaluate, real_roots
from expsplit.split import (
    NoCrossingError,
    SplitOptions,
    build_system,
    default_correction_order,
    equilibrium,
    fit_splitting,
    headroom,
    integrate,
    manifold_coefficients,
    measure_splitting,
    seed_point,
    shoot_to_section,
)

MICHELSEN = PolyQ.parse("-f^2+1")
CUBIC = PolyQ.parse("-f^3+f")


# ------------------------------------------------------------------ system


@pytest.mark.parametrize("Q", [MICHELSEN, CUBIC, PolyQ.parse("-f^4+5f^2-4")])
def test_rhs_vanishes_at_roots(Q):
    rs = real_roots(Q, "qd")
    sysm = build_system(Q, 0.07)
    zero = ExReal(0, "qd")
    for j in range(1, Q.kappa + 1):
        out = sysm.rhs((ExReal(rs.q(j), "qd"), zero, zero))
        assert max(abs(float(c)) for c in out) < 1e-60


def test_build_system_rejects_nonpositive_eps():
    with pytest.raises(ValueError):
        build_system(MICHELSEN, 0.0)


# dyadic ε keeps τ = t / e1 exact as a float duration
@pytest.mark.parametrize("Q,eps", [(MICHELSEN, 0.125), (CUBIC, 0.25)])
def test_fast_system_matches_third_order_form(Q, eps):
    sysm = build_system(Q, eps)
    f0 = tuple(ExReal(c, "qd") for c in ("0.2", "0.1", "-0.3"))
    t = 0.5
    tau = t / float(sysm.e1)
    fast, _ = integrate(sysm, sysm.from_third_order(f0), tau)
    third, _ = integrate(sysm, f0, t, kind="third")
    mapped = sysm.from_third_order(third)
    assert max(abs(float(a - b)) for a, b in zip(fast, mapped)) < 1e-40


def test_backward_integration_inverts_forward():
    sysm = build_system(CUBIC, 0.25)
    v0 = tuple(ExReal(c, "qd") for c in ("0.4", "0.05", "-0.02"))
    fwd, _ = integrate(sysm, v0, 7.0)
    back, _ = integrate(sysm, fwd, -7.0)
    assert max(abs(float(a - b)) for a, b in zip(back, v0)) < 1e-40


def test_reduced_flow_drift_is_second_order():
    # start near the critical manifold: y = Q(x), z = 0; compare with tanh in slow time
    x0, t = 0.2, 1.0
    exact = math.tanh(t + math.atanh(x0))
    drift = []
    e1s = [0.04, 0.02, 0.01]
    for e1 in e1s:
        sysm = build_system(MICHELSEN, e1, "dd")
        v0 = (ExReal(x0, "dd"), evaluate(MICHELSEN, ExReal(x0, "dd")), ExReal(0, "dd"))
        v, _ = integrate(sysm, v0, t / e1)
        drift.append(abs(float(v[0]) - exact))
    slope = np.polyfit(np.log(e1s), np.log(drift), 1)[0]
    assert abs(slope - 2.0) < 0.3, f"slope {slope:.3f}"


# -------------------------------------------------------------- normal form


def test_nft_at_zero_eps():
    z = ExReal(0, "qd")
    v = tuple(ExReal(c, "qd") for c in ("0.3", "0.7", "-0.2"))
    out = nft(CUBIC, z, v)
    assert out[0] == v[0] and out[2] == v[2]
    assert out[1] == v[1] - evaluate(CUBIC, v[0])


@pytest.mark.parametrize("eps", [0.01, 0.2, 0.5])
def test_nft_fixes_roots(eps):
    rs = real_roots(CUBIC, "qd")
    e1 = ExReal(eps, "qd") ** 2
    zero = ExReal(0, "qd")
    for j in (1, 2, 3):
        q = ExReal(rs.q(j), "qd")
        out = nft(CUBIC, e1, (q, zero, zero))
        assert abs(float(out[0] - q)) < 1e-60
        assert abs(float(out[1])) < 1e-60 and abs(float(out[2])) < 1e-60


@settings(max_examples=30)
@given(st.floats(0.01, 0.2), st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_nft_inverse_round_trip(e1, v):
    e1 = ExReal(e1, "qd")
    v = tuple(ExReal(c, "qd") for c in v)
    back = nft_inverse(MICHELSEN, e1, nft(MICHELSEN, e1, v))
    assert max(abs(float(a - b)) for a, b in zip(back, v)) < 1e-50


# -------------------------------------------------------------- equilibria


def test_equilibrium_michelsen_kinds():
    rs = real_roots(MICHELSEN, "qd")
    eps = 0.05
    sysm = build_system(MICHELSEN, eps)
    e1 = equilibrium(sysm, rs, 1)
    e2 = equilibrium(sysm, rs, 2)
    assert e1.manifold_kind == "stable" and e2.manifold_kind == "unstable"
    assert abs(float(e1.lambda1) + 2 * eps) < 10 * eps**2
    assert abs(float(e2.lambda1) - 2 * eps) < 10 * eps**2
    for eq in (e1, e2):
        assert float(eq.lambda23.re) * float(eq.lambda1) < 0


@pytest.mark.parametrize("Q,eps", [(MICHELSEN, 0.08), (CUBIC, 0.3),
                                   (PolyQ.parse("-f^4+5f^2-4"), 0.3)])
def test_eigenvalue_expansion_constants_bounded(Q, eps):
    rs = real_roots(Q, "qd")
    k = Q.kappa
    for j in range(1, k + 1):
        consts = []
        for e in (eps, eps / 2, eps / 4):
            sysm = build_system(Q, e)
            eq = equilibrium(sysm, rs, j)
            e1 = float(sysm.e1)
            d = float(evaluate(Q, ExReal(rs.q(j), "qd"), 1))
            c1 = abs(float(eq.lambda1) - e1 * d) / e1**2
            l23 = complex(float(eq.lambda23.re), float(eq.lambda23.im))
            c23 = abs(l23 - complex(-0.5 * e1 * d, 1.0)) / e1**2
            off = max(abs(float(eq.point[0]) - float(rs.q(j))),
                      abs(float(eq.point[1])), abs(float(eq.point[2]))) / e1**2
            consts.append((c1, c23, off))
        # the second-order terms scale with Q'(q)²
        arr = np.array(consts) / (1.0 + d * d)
        assert np.all(arr < 2.0)
        # the constants settle: no growth under halving
        assert np.all(arr[2] <= 2.0 * arr[0] + 1e-12)


def test_seed_invariance_of_parametrization():
    # flowing W(σ) for time τ lands on W(σ e^{λ₁τ}) up to the truncation order
    rs = real_roots(MICHELSEN, "qd")
    sysm = build_system(MICHELSEN, 0.1)
    eq = equilibrium(sysm, rs, 2)
    sigma, tau = 1e-3, 3.0
    grow = exp(eq.lambda1 * tau)
    errs = {}
    for order in (1, 6):
        v, _ = integrate(sysm, seed_point(sysm, eq, sigma, order), tau)
        target = seed_point(sysm, eq, grow * ExReal(sigma, "qd"), order)
        errs[order] = max(abs(float(a - b)) for a, b in zip(v, target))
    assert errs[1] < 10 * sigma**2 and errs[6] < 1e-15 * sigma
    assert errs[6] < 1e-10 * errs[1]


def test_manifold_first_coefficient_is_eigenvector():
    rs = real_roots(CUBIC, "qd")
    sysm = build_system(CUBIC, 0.25)
    eq = equilibrium(sysm, rs, 1)
    W = manifold_coefficients(sysm, eq, 4)
    assert W[0] == list(eq.v1) and len(W) == 4
    assert float(eq.v1[0]) == 1.0


# ------------------------------------------------------------- measurement


@pytest.fixture(scope="module")
def michelsen_record():
    return measure_splitting(MICHELSEN, 0.1, 1, SplitOptions(pj=0))


def test_michelsen_measurement(michelsen_record):
    r = michelsen_record
    assert r.status == "ok" and r.kappa == 2 and r.j == 1
    assert float(r.section_residual) <= 1e-20
    mag = float(r.abs)
    assert mag > 0 and math.isfinite(mag)
    # even Q and p = 0: the reversible symmetry leaves only the z-component
    assert abs(float(r.dy)) <= 1e-30 * mag
    scale = 0.1**-3 * math.exp(-math.pi / 0.2)
    assert 1.0 < mag / scale < 20.0


def test_michelsen_measurement_robust(michelsen_record):
    r = michelsen_record
    assert r.rel_change_delta < 1e-3 and r.rel_change_tol < 1e-3
    assert r.error_estimate < 1e-30 * float(r.abs)


def test_row_has_all_columns(michelsen_record):
    row = michelsen_record.row()
    assert list(row) == ["kappa", "j", "eps", "pj", "dy", "dz", "abs", "ln_abs",
                         "seed_delta", "tol", "status"]
    assert float(row["ln_abs"]) == pytest.approx(math.log(float(michelsen_record.abs)))


def test_odd_symmetry_between_connections():
    opts = SplitOptions(robustness=False)
    a = measure_splitting(CUBIC, 0.3, 1, opts)
    b = measure_splitting(CUBIC, 0.3, 2, opts)
    assert float(a.pj) == pytest.approx(-float(b.pj), abs=1e-12)
    assert abs(float(a.abs - b.abs)) <= 1e-6 * float(a.abs)


def test_half_step_reintegration():
    rs = real_roots(CUBIC, "qd")
    sysm = build_system(CUBIC, 0.3)
    eq = equilibrium(sysm, rs, 2)
    v0 = seed_point(sysm, eq, 1e-8)
    p = ExReal(0.3, "qd")
    tol = 1e-45
    hits = []
    for scale in (1.0, 0.5):
        shot = shoot_to_section(sysm, v0, p, backward=False, tol=tol, tau_max=1e4,
                                step_scale=scale)
        hits.append(shot.hit)
        assert shot.section_residual <= 1e-20
    assert max(abs(float(a - b)) for a, b in zip(*hits)) < 10 * tol


def test_no_crossing_raises():
    rs = real_roots(CUBIC, "qd")
    sysm = build_system(CUBIC, 0.3)
    eq = equilibrium(sysm, rs, 2)
    with pytest.raises(NoCrossingError):
        shoot_to_section(sysm, seed_point(sysm, eq, 1e-8), ExReal(0.3, "qd"),
                         backward=False, tol=1e-45, tau_max=5.0)


def test_measure_rejects_bad_j():
    with pytest.raises(ValueError):
        measure_splitting(MICHELSEN, 0.1, 2, SplitOptions(robustness=False, pj=0))


# --------------------------------------------------------------------- fit


@settings(max_examples=40)
@given(st.integers(2, 4), st.floats(0.5, 3.0), st.floats(-8.0, -1.0), st.floats(-2, 2),
       st.floats(-1, 1), st.floats(-1, 1), st.integers(0, 2**31))
def test_fit_recovers_synthetic_parameters(kappa, T, a, c0, b1, b2, seed):
    rnd = random.Random(seed)
    lo = rnd.uniform(0.05, 0.2)
    eps = np.geomspace(lo, 2.5 * lo, 8)
    y = c0 + a * np.log(eps) - T * eps ** (1 - kappa) + b1 * eps + b2 * eps**2
    rep = fit_splitting(eps, y, kappa, 1, T)
    assert rep.correction_order == 2
    assert rep.fitted_T == pytest.approx(T, rel=1e-6, abs=1e-6)
    assert rep.fitted_prefactor_exponent == pytest.approx(a, rel=1e-5, abs=1e-5)
    assert max(abs(r) for r in rep.residuals) < 1e-8


def test_fit_without_corrections_on_six_points():
    eps = np.linspace(0.18, 0.30, 6)
    y = 0.4 - 4.5 * np.log(eps) - (math.pi / 2) * eps**-2
    rep = fit_splitting(eps, y, 3, 1, math.pi / 2)
    assert rep.correction_order == default_correction_order(6) == 0
    assert rep.fitted_T == pytest.approx(math.pi / 2, rel=1e-9)
    # one alternation pass ignores the ln ε column, so it is only a diagnostic
    assert math.isfinite(rep.single_pass_T) and math.isfinite(rep.single_pass_exponent)
    assert rep.fitted_prefactor_exponent == pytest.approx(-4.5, rel=1e-8)
    assert rep.implied_lnC == pytest.approx([0.4] * 6, abs=1e-8)
    assert not rep.ill_conditioned
    d = rep.as_dict()
    assert d["expected_prefactor_exponent"] == -4.5 and set(d["variants"]) == {"0", "1", "2"}


def test_fit_needs_six_points():
    eps = np.linspace(0.1, 0.2, 5)
    with pytest.raises(ValueError):
        fit_splitting(eps, -1 / eps, 2, 1, 1.0)


def test_headroom_is_smallest_scale():
    assert headroom(2, math.pi / 2, [0.04, 0.12]) == pytest.approx(math.exp(-math.pi / 0.08))
