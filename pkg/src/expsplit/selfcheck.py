"""Quick randomized property checks behind ``expsplit selftest``.

Each check returns ``(name, passed, detail)``.  The pytest suite covers the
same ground more thoroughly; these run in seconds without it.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .canonical import nft, nft_inverse
from .cflow import IMAG, REAL, StopRule, trace_flow
from .hiprec import ExReal, sqrt
from .poly import PolyQ, real_roots, residue_sum
from .series import phi_coefficients


def random_roots(rng: random.Random, kappa: int, lo=-3.0, hi=3.0, gap=0.2) -> list:
    """``kappa`` roots in [lo, hi] with pairwise gap ≥ ``gap`` (rejection sampling)."""
    while True:
        r = sorted(round(rng.uniform(lo, hi), 6) for _ in range(kappa))
        if all(b - a >= gap for a, b in zip(r, r[1:])):
            return r


def check_arithmetic(rng, count, prec):
    worst = 0.0
    for _ in range(count):
        a = ExReal(rng.uniform(-1e3, 1e3), prec) / 7
        b = ExReal(rng.uniform(0.1, 1e3), prec) / 3
        worst = max(worst, abs(float((a * b) / b - a)) / abs(float(a)),
                    abs(float(sqrt(b) * sqrt(b) - b)) / float(b))
    tol = {"dd": 1e-30, "qd": 1e-60}[prec]
    return "arithmetic round trips", worst <= tol, f"worst rel {worst:.2e}"


def check_euler_jacobi(rng, count, prec):
    worst = 0.0
    for kappa in range(2, 9):
        for _ in range(count):
            Q = PolyQ.from_roots([Fraction(r).limit_denominator(10**6)
                                  for r in random_roots(rng, kappa)])
            worst = max(worst, abs(float(residue_sum(real_roots(Q, prec), kappa))))
    tol = {"dd": 1e-20, "qd": 1e-30}[prec]
    return "sum of 1/Q'(q) vanishes", worst <= tol, f"worst {worst:.2e}"


def check_nft_inverse(rng, count, prec):
    Q = PolyQ.parse("-f^3+f")
    worst = 0.0
    for _ in range(count):
        e1 = ExReal(rng.uniform(0.01, 0.1), prec)
        v = tuple(ExReal(rng.uniform(-1, 1), prec) for _ in range(3))
        back = nft_inverse(Q, e1, nft(Q, e1, v))
        worst = max(worst, max(abs(float(a - b)) for a, b in zip(back, v)))
    tol = {"dd": 1e-28, "qd": 1e-50}[prec]
    return "normal-form map inverts", worst <= tol, f"worst {worst:.2e}"


def check_series_head(rng, count, prec):
    sp = phi_coefficients(2, 4)
    head = [(sp.y_coeffs[n], sp.z_coeffs[n]) for n in range(2)]
    ok = head == [(-1, 0), (0, 2)]
    return "inner series head, kappa=2", ok, str(head)


def check_flow_symmetries(rng, count, prec):
    Q = PolyQ.parse("-f^3+f")
    worst = 0.0
    n = max(2, count // 4)
    for _ in range(n):
        x0 = complex(rng.uniform(-1.5, 1.5), rng.uniform(0.05, 1.5))
        stop = StopRule(r_esc=20.0, s_max=5.0, max_steps=2000)
        a = trace_flow(Q, x0, REAL, 1, stop, rtol=1e-11, atol=1e-11)
        b = trace_flow(Q, x0.conjugate(), REAL, 1, stop, rtol=1e-11, atol=1e-11)
        worst = max(worst, _path_gap(a, b))
        x0 = rng.uniform(-1.5, 1.5)
        stop = StopRule(r_esc=20.0, real_axis=True, max_steps=2000)
        f = trace_flow(Q, x0, IMAG, 1, stop, rtol=1e-11, atol=1e-11)
        g = trace_flow(Q, x0, IMAG, -1, stop, rtol=1e-11, atol=1e-11)
        worst = max(worst, _path_gap(f, g))
    return "flow conjugation symmetries", worst <= 1e-10, f"worst {worst:.2e}"


def _path_gap(a, b) -> float:
    xa, xb = a.x_values(), b.x_values()
    if xa.shape != xb.shape:
        return float("inf")
    return float(max(abs(xa - xb.conjugate())))


CHECKS = (check_arithmetic, check_euler_jacobi, check_nft_inverse, check_series_head,
          check_flow_symmetries)


def run_all(seed: int = 0, count: int = 20, prec: str = "qd") -> list:
    out = []
    for chk in CHECKS:
        rng = random.Random(seed)
        try:
            out.append(chk(rng, count, prec))
        except Exception as exc:  # a crash counts as a failed check
            out.append((chk.__name__, False, f"{type(exc).__name__}: {exc}"))
    return out
