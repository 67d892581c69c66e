"""Compiled Taylor-series integrator in double-double / quad-double.

The supported systems have the form ``v' = A v + b Q(c·v)`` with a 3-vector
state and a scalar polynomial nonlinearity Q.  The fast-time slow-fast
system and the third-order form of the model equation both fit.  Every
number is a float64 array of ``k`` components (see ``hiprec._kernels``).

Taylor coefficients come from the standard recurrences: u = c·v, the Horner
stages of Q(u) are products of series, and v_{m+1} = (A v_m + b q_m)/(m+1).
The step size follows Jorba & Zou: with order n ≈ -ln(tol)/2 the last two
coefficients decide h so that their contributions stay below ``tol``.  The
Taylor polynomial doubles as exact-order dense output, which the section
event uses for a Newton solve in full precision.
"""

import math

import numpy as np
from numba import njit

from .hiprec._kernels import _prod_terms, add, distill, mul, sub

STATUS_HIT, STATUS_TIME_CAP, STATUS_STEP_CAP, STATUS_NEWTON = 0, 1, 2, 3
_GRID = 2.0 ** -30


@njit(cache=True)
def _dot_into(buf, n, a, b, k):
    return _prod_terms(a, b, k, buf, n)


@njit(cache=True)
def taylor_coefficients(v0, A, b, c, qc, inv, n, k):
    """Coefficients T[m, r] of the solution through ``v0``, m = 0..n."""
    kap = qc.shape[0] - 1
    T = np.zeros((n + 1, 3, k))
    T[0] = v0
    U = np.zeros((n + 1, k))
    H = np.zeros((kap + 1, n + 1, k))
    H[0, 0] = qc[kap]
    buf = np.empty(2 * (n + 2) * k * k + 8 * k)
    for m in range(n):
        nt = 0
        for s in range(3):
            nt = _dot_into(buf, nt, c[s], T[m, s], k)
        U[m] = distill(buf, nt, k)
        for i in range(1, kap + 1):
            nt = 0
            for l in range(m + 1):
                nt = _dot_into(buf, nt, H[i - 1, l], U[m - l], k)
            if m == 0:
                for t in range(k):
                    buf[nt] = qc[kap - i, t]
                    nt += 1
            H[i, m] = distill(buf, nt, k)
        for r in range(3):
            nt = 0
            for s in range(3):
                nt = _dot_into(buf, nt, A[r, s], T[m, s], k)
            nt = _dot_into(buf, nt, b[r], H[kap, m], k)
            T[m + 1, r] = mul(distill(buf, nt, k), inv[m + 1], k)
    return T


@njit(cache=True)
def eval_poly(T, t, k):
    """Σ_m T[m] t^m for a k-component ``t``."""
    n = T.shape[0] - 1
    out = np.zeros((3, k))
    for r in range(3):
        acc = T[n, r].copy()
        for m in range(n - 1, -1, -1):
            acc = add(mul(acc, t, k), T[m, r], k)
        out[r] = acc
    return out


@njit(cache=True)
def eval_poly_deriv(T, t, k):
    n = T.shape[0] - 1
    out = np.zeros((3, k))
    for r in range(3):
        acc = T[n, r] * float(n)
        for m in range(n - 1, 0, -1):
            acc = add(mul(acc, t, k), T[m, r] * float(m), k)
        out[r] = acc
    return out


@njit(cache=True)
def _horner(coef, x, k):
    nc = coef.shape[0]
    acc = coef[nc - 1].copy()
    for i in range(nc - 2, -1, -1):
        acc = add(mul(acc, x, k), coef[i], k)
    return acc


@njit(cache=True)
def section_value(v, dqc, e1sq, p, k):
    """x̃₂ - p with x̃₂ = x₂ + e1² Q'(x₂) y₂."""
    d = _horner(dqc, v[0], k)
    return sub(add(v[0], mul(mul(e1sq, d, k), v[1], k), k), p, k)


@njit(cache=True)
def _section_grad(v, dqc, ddqc, e1sq, k):
    d = _horner(dqc, v[0], k)[0]
    dd = _horner(ddqc, v[0], k)[0]
    e = e1sq[0]
    return 1.0 + e * dd * v[1, 0], e * d


@njit(cache=True)
def choose_step(T, tol, scale):
    n = T.shape[0] - 1
    h = 1e300
    for j in (n - 1, n):
        nrm = 0.0
        for r in range(3):
            nrm = max(nrm, abs(T[j, r, 0]))
        if nrm > 0.0:
            h = min(h, (tol * scale / nrm) ** (1.0 / j))
    return h


@njit(cache=True)
def shoot(v0, A, b, c, qc, dqc, ddqc, e1sq, p, inv, n, tol, tau_max, max_steps,
          step_scale, k):
    """Integrate until x̃₂ crosses ``p``.

    Returns (status, state at the hit, τ of the hit as float, number of
    steps, |x̃₂ - p| at the hit).
    """
    v = v0.copy()
    g0 = section_value(v, dqc, e1sq, p, k)[0]
    tau = 0.0
    for step in range(max_steps):
        T = taylor_coefficients(v, A, b, c, qc, inv, n, k)
        scale = 1.0
        for r in range(3):
            scale = max(scale, abs(v[r, 0]))
        h = choose_step(T, tol, scale) * step_scale
        hk = np.zeros(k)
        hk[0] = h
        v_new = eval_poly(T, hk, k)
        g1 = section_value(v_new, dqc, e1sq, p, k)[0]
        if g1 == 0.0 or (g1 > 0.0) != (g0 > 0.0):
            # Newton on the step fraction using the Taylor polynomial
            t = np.zeros(k)
            t[0] = h * g0 / (g0 - g1)
            lo, hi = 0.0, h
            res = 0.0
            ulp = 2.0 ** (-52 * k)
            for _ in range(60):
                V = eval_poly(T, t, k)
                g = section_value(V, dqc, e1sq, p, k)
                dV = eval_poly_deriv(T, t, k)
                gx, gy = _section_grad(V, dqc, ddqc, e1sq, k)
                dg = gx * dV[0, 0] + gy * dV[1, 0]
                res = abs(g[0])
                if res <= 4.0 * ulp * scale:
                    return STATUS_HIT, V, tau + t[0], step + 1, res
                if (g[0] > 0.0) == (g0 > 0.0):
                    lo = max(lo, t[0])
                else:
                    hi = min(hi, t[0])
                dt = g.copy()
                for i in range(k):
                    dt[i] = -g[i] / dg
                dt = distill(dt, k, k)
                t = add(t, dt, k)
                if not (lo <= t[0] <= hi):
                    t = np.zeros(k)
                    t[0] = 0.5 * (lo + hi)
                elif abs(dt[0]) <= ulp * h:
                    V = eval_poly(T, t, k)
                    res = abs(section_value(V, dqc, e1sq, p, k)[0])
                    return STATUS_HIT, V, tau + t[0], step + 1, res
            return STATUS_NEWTON, eval_poly(T, t, k), tau + t[0], step + 1, res
        v = v_new
        g0 = g1
        tau += h
        if tau > tau_max:
            return STATUS_TIME_CAP, v, tau, step + 1, abs(g0)
    return STATUS_STEP_CAP, v, tau, max_steps, abs(g0)


@njit(cache=True)
def integrate_fixed(v0, A, b, c, qc, inv, n, tol, tau_end, step_scale, k):
    """Integrate to time ``tau_end`` (positive); returns the final state and step count."""
    v = v0.copy()
    tau = 0.0
    steps = 0
    while tau < tau_end:
        T = taylor_coefficients(v, A, b, c, qc, inv, n, k)
        scale = 1.0
        for r in range(3):
            scale = max(scale, abs(v[r, 0]))
        h = choose_step(T, tol, scale) * step_scale
        # dyadic steps keep the running τ exact, so the last step lands on tau_end
        if h > _GRID:
            h = math.floor(h / _GRID) * _GRID
        if tau + h >= tau_end:
            h = tau_end - tau
        hk = np.zeros(k)
        hk[0] = h
        v = eval_poly(T, hk, k)
        tau += h
        steps += 1
    return v, steps


def order_for(tol: float) -> int:
    """Taylor order ≈ -ln(tol)/2 + 1 (Jorba & Zou)."""
    return int(math.ceil(-0.5 * math.log(tol))) + 1
