"""Complex flows x' = Q(x) and x' = iQ(x) on the compactified plane.

Near infinity the flows are followed in the chart x = w^{-1} e^{iθ}, where
the vector field divided by w^{1-κ} is regular at w = 0.  The time ``s`` of
the original flow is carried along as a state variable with ds/dσ = w^{κ-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import hiprec as hp
from .hiprec import ExComplex, ExReal
from .ode import RK78, StepSizeUnderflow
from .poly import PolyQ, RootSet

__all__ = [
    "InfinityEquilibrium",
    "StopRule",
    "PathSample",
    "PhasePath",
    "SeparatrixResult",
    "IntegrationError",
    "ClassifierError",
    "TailError",
    "infinity_equilibria",
    "chart_field",
    "to_chart",
    "to_interior",
    "default_r_switch",
    "trace_flow",
    "locate_pj",
    "blowup_time_integrated",
    "tail_coefficients",
    "portrait",
]

REAL, IMAG = "real", "imaginary"
INTERIOR, CHART = "interior", "w1theta"


class IntegrationError(RuntimeError):
    """Integration failed; ``path`` holds the samples computed so far."""

    def __init__(self, msg: str, path: "PhasePath | None" = None):
        super().__init__(msg)
        self.path = path


class ClassifierError(RuntimeError):
    """An orbit neither returned to the real axis nor escaped within the caps."""


class TailError(RuntimeError):
    """The expansion of 1/Q at infinity did not converge at the escape radius."""


# ---------------------------------------------------------------- infinity


@dataclass(frozen=True)
class InfinityEquilibrium:
    """Saddle on the equator of the Poincaré hemisphere.

    ``eigs`` are the eigenvalues of the desingularized chart field in the
    (w₁, θ) directions.
    """

    kind: str  # "real_flow_e" or "imag_flow_h"
    index: int
    theta: ExReal
    eigs: tuple


def infinity_equilibria(Q: PolyQ, prec: str = "dd") -> list:
    """The 2(κ-1) saddles at infinity of each flow, real flow first."""
    k1 = Q.kappa - 1
    pi = hp.pi(prec)
    out = []
    for l in range(1, 2 * k1 + 1):
        sgn = (-1) ** (l - 1)
        out.append(InfinityEquilibrium(
            "real_flow_e", l, pi * (l - 1) / k1,
            (ExReal(sgn, prec), ExReal(-k1 * sgn, prec))))
    for l in range(1, 2 * k1 + 1):
        sgn = (-1) ** l
        out.append(InfinityEquilibrium(
            "imag_flow_h", l, pi * (l - 1) / k1 + pi / (2 * k1),
            (ExReal(sgn, prec), ExReal(-k1 * sgn, prec))))
    return out


def _trig(prec: str):
    if prec == "double":
        return math.cos, math.sin
    return hp.cos, hp.sin


def chart_field(Q: PolyQ, flow: str, w, theta, prec: str = "double"):
    """Desingularized (dw/dσ, dθ/dσ) in the chart x = w^{-1} e^{iθ}."""
    cos, sin = _trig(prec)
    k = Q.kappa
    a = Q.a if prec != "double" else tuple(float(v) for v in Q.a)
    if prec != "double":
        a = tuple(ExReal(v, prec) for v in Q.a)
    th1 = theta * (k - 1)
    ca, sa = -cos(th1), -sin(th1)
    wp = 1 if prec == "double" else ExReal(1, prec)
    # Σ a_α w^{κ-α} (cos, sin)((α-1)θ), accumulated from α = κ-1 downwards
    for alpha in range(k - 1, -1, -1):
        wp = wp * w
        if a[alpha]:
            arg = theta * (alpha - 1)
            ca = ca + a[alpha] * wp * cos(arg)
            sa = sa + a[alpha] * wp * sin(arg)
    if flow == REAL:
        return -w * ca, sa
    return w * sa, ca


def to_chart(x, prec: str = "double"):
    """(w, θ) of a nonzero point x."""
    if prec == "double":
        x = complex(x)
        return 1.0 / abs(x), math.atan2(x.imag, x.real)
    x = x if isinstance(x, ExComplex) else ExComplex(x, prec=prec)
    return 1 / abs(x), hp.atan2(x.im, x.re)


def to_interior(w, theta, prec: str = "double"):
    cos, sin = _trig(prec)
    if prec == "double":
        return complex(cos(theta) / w, sin(theta) / w)
    return ExComplex(cos(theta) / w, sin(theta) / w)


def default_r_switch(rs_or_roots) -> float:
    roots = rs_or_roots.roots if isinstance(rs_or_roots, RootSet) else rs_or_roots
    return 2.0 * (1.0 + max(abs(float(r)) for r in roots))


# ---------------------------------------------------------------- paths


@dataclass
class StopRule:
    """Termination conditions for :func:`trace_flow`.

    ``r_esc`` stops when |x| reaches it; ``real_axis`` stops at the first
    return to Im x = 0; ``s_max`` caps |s| and ``max_steps`` caps the steps.
    """

    r_esc: float | None = None
    real_axis: bool = False
    s_max: float | None = None
    max_steps: int = 20000


@dataclass(frozen=True)
class PathSample:
    s: object
    x: object
    chart: str


@dataclass
class PhasePath:
    flow: str
    direction: int
    start: object
    samples: list = field(default_factory=list)
    reason: str = ""
    steps: int = 0

    @property
    def end(self) -> PathSample:
        return self.samples[-1]

    def s_values(self) -> np.ndarray:
        return np.array([float(p.s) for p in self.samples])

    def x_values(self) -> np.ndarray:
        return np.array([complex(p.x) for p in self.samples])

    def rows(self):
        """(flow, s, Re x, Im x, chart) tuples for CSV output."""
        for p in self.samples:
            x = complex(p.x)
            yield (self.flow, float(p.s), x.real, x.imag, p.chart)


class _Event:
    """Scalar event g(state) with gradient, per chart."""

    def __init__(self, g, grad):
        self.g = g
        self.grad = grad


class _Tracer:
    def __init__(self, Q, flow, direction, prec, r_switch, rtol, atol):
        self.Q = Q
        self.flow = flow
        self.dir = direction
        self.prec = prec
        self.r_switch = r_switch
        self.k = Q.kappa
        if prec == "double":
            self.coef = tuple(float(c) for c in Q.coefficients)
        else:
            self.coef = tuple(ExReal(c, prec) for c in Q.coefficients)
        self.int = RK78(self._f_interior, rtol, atol, prec)
        self.cht = RK78(self._f_chart, rtol, atol, prec)

    def _arr(self, vals):
        if self.prec == "double":
            return np.array(vals, dtype=float)
        return np.array([ExReal(v, self.prec) if not isinstance(v, ExReal) else v
                         for v in vals], dtype=object)

    def _Qc(self, x):
        acc = self.coef[-1]
        for c in self.coef[-2::-1]:
            acc = acc * x + c
        return acc

    def _f_interior(self, y):
        if self.prec == "double":
            q = self._Qc(complex(y[0], y[1]))
            qr, qi = q.real, q.imag
        else:
            q = self._Qc(ExComplex(y[0], y[1]))
            qr, qi = q.re, q.im
        d = self.dir
        if self.flow == REAL:
            return self._arr([d * qr, d * qi, d])
        return self._arr([-d * qi, d * qr, d])

    def _f_chart(self, y):
        w, th = y[0], y[1]
        dw, dth = chart_field(self.Q, self.flow, w, th, self.prec)
        d = self.dir
        return self._arr([d * dw, d * dth, d * w ** (self.k - 1)])

    # conversions keep s untouched
    def to_chart(self, y):
        x = complex(y[0], y[1]) if self.prec == "double" else ExComplex(y[0], y[1])
        w, th = to_chart(x, self.prec)
        return self._arr([w, th, y[2]])

    def to_interior(self, y):
        x = to_interior(y[0], y[1], self.prec)
        if self.prec == "double":
            return self._arr([x.real, x.imag, y[2]])
        return self._arr([x.re, x.im, y[2]])

    def x_of(self, y, chart):
        if chart == INTERIOR:
            if self.prec == "double":
                return complex(y[0], y[1])
            return ExComplex(y[0], y[1])
        return to_interior(y[0], y[1], self.prec)

    # event functions --------------------------------------------------
    def im_event(self, chart):
        if chart == INTERIOR:
            return _Event(lambda y: y[1], lambda y, f: f[1])
        cos, sin = _trig(self.prec)
        return _Event(lambda y: sin(y[1]), lambda y, f: cos(y[1]) * f[1])

    def esc_event(self, chart, r_esc):
        if chart == INTERIOR:
            def g(y):
                return r_esc * r_esc - (y[0] * y[0] + y[1] * y[1])

            return _Event(g, lambda y, f: -2 * (y[0] * f[0] + y[1] * f[1]))
        return _Event(lambda y: y[0] - 1.0 / r_esc, lambda y, f: f[0])


def _locate(stepper, y0, h, ev: _Event, g0, iters: int = 40):
    """Find σ in (0, h] where the event changes sign by re-stepping from y0.

    Safeguarded Newton on the step length with a shrinking bracket.
    """
    lo, hi = 0.0, h
    glo = float(g0)
    t = h
    y_t = None
    for _ in range(iters):
        hh = t if stepper.kind == "double" else ExReal(t, stepper.kind)
        y_t, _ = stepper.step(y0, hh)
        g = float(ev.g(y_t))
        if g == 0.0:
            return y_t, t
        if (g > 0) == (glo > 0):
            lo, glo = t, g
        else:
            hi = t
        dg = float(ev.grad(y_t, stepper.f(y_t)))
        t_new = t - g / dg if dg != 0.0 else 0.5 * (lo + hi)
        if not (min(lo, hi) < t_new < max(lo, hi)):
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= 1e-15 * abs(h) or abs(hi - lo) <= 1e-16 * abs(h):
            t = t_new
            hh = t if stepper.kind == "double" else ExReal(t, stepper.kind)
            y_t, _ = stepper.step(y0, hh)
            return y_t, t
        t = t_new
    return y_t, t


def trace_flow(Q: PolyQ, x0, flow: str = IMAG, direction: int = 1,
               stop: StopRule | None = None, *, r_switch: float | None = None,
               rtol: float = 1e-13, atol: float = 1e-13, prec: str = "double",
               h0: float = 0.01) -> PhasePath:
    """Follow x' = Q(x) (``flow="real"``) or x' = iQ(x) from ``x0``.

    The path switches to the (w₁, θ) chart when |x| > r_switch and back when
    |x| < r_switch/2.  Events (escape radius, real-axis return) are located
    by re-stepping from the start of the step that brackets them.
    """
    if flow not in (REAL, IMAG):
        raise ValueError(f"unknown flow {flow!r}")
    stop = stop or StopRule()
    if r_switch is None:
        from .poly import real_roots

        rs = real_roots(Q, "dd")
        mags = [abs(float(r)) for r in rs.roots] or [1.0]
        r_switch = 2.0 * (1.0 + max(mags))
    tr = _Tracer(Q, flow, direction, prec, r_switch, rtol, atol)
    if prec == "double":
        x0c = complex(x0)
        y = tr._arr([x0c.real, x0c.imag, 0.0])
        r0 = abs(x0c)
    else:
        z = x0 if isinstance(x0, ExComplex) else ExComplex(x0, prec=prec)
        y = tr._arr([z.re, z.im, 0])
        r0 = abs(float(z.re) + 1j * float(z.im))
    if not math.isfinite(r0):
        raise ValueError("x0 must be finite")
    chart = INTERIOR
    if r0 > r_switch:
        y = tr.to_chart(y)
        chart = CHART
    path = PhasePath(flow, direction, x0)
    path.samples.append(PathSample(y[2], tr.x_of(y, chart), chart))
    h = h0
    left_axis = False
    for nstep in range(stop.max_steps):
        stepper = tr.int if chart == INTERIOR else tr.cht
        try:
            y_new, h_taken, h = stepper.adaptive_step(y, h)
        except StepSizeUnderflow as exc:
            path.reason = "step_underflow"
            raise IntegrationError(str(exc), path) from exc
        path.steps = nstep + 1
        # events, checked in a fixed order
        events = []
        if stop.r_esc is not None:
            events.append(("escaped", tr.esc_event(chart, stop.r_esc)))
        if stop.real_axis:
            events.append(("returned_to_real_axis", tr.im_event(chart)))
        hit = None
        for name, ev in events:
            g0, g1 = float(ev.g(y)), float(ev.g(y_new))
            if name == "returned_to_real_axis":
                if not left_axis:
                    if g1 != 0.0:
                        left_axis = True
                    continue
                crossed = g1 == 0.0 or (g0 > 0) != (g1 > 0)
            else:
                crossed = g1 <= 0.0 < g0 or g1 == 0.0
            if crossed:
                y_hit, t_hit = _locate(stepper, y, h_taken, ev, g0)
                if hit is None or t_hit < hit[2]:
                    hit = (name, y_hit, t_hit)
        if hit is not None:
            name, y_hit, _ = hit
            path.samples.append(PathSample(y_hit[2], tr.x_of(y_hit, chart), chart))
            path.reason = name
            return path
        y = y_new
        path.samples.append(PathSample(y[2], tr.x_of(y, chart), chart))
        if stop.s_max is not None and abs(float(y[2])) >= stop.s_max:
            path.reason = "max_steps"
            return path
        # chart switching with hysteresis
        if chart == INTERIOR and float(y[0]) ** 2 + float(y[1]) ** 2 > r_switch**2:
            y = tr.to_chart(y)
            chart = CHART
            h = min(h, 0.1)
        elif chart == CHART and float(y[0]) * r_switch > 2.0:
            y = tr.to_interior(y)
            chart = INTERIOR
            h = min(h, 0.01)
    path.reason = "max_steps"
    return path


# ------------------------------------------------------------ separatrices


@dataclass
class SeparatrixResult:
    """Crossing point p^j of the imaginary-time separatrix H^j and its blowup time."""

    j: int
    pj: ExReal
    Tj_integrated: ExReal
    path: PhasePath
    bisection_width: ExReal
    tail_terms_used: int
    r_esc: float = 0.0
    tj_imag_residual: float = 0.0


def _returns_right(Q, p: float, r_switch, rtol, max_steps) -> bool | None:
    """True when the imaginary-time orbit of real ``p`` comes back at c > p."""
    path = trace_flow(Q, p, IMAG, 1, StopRule(real_axis=True, max_steps=max_steps),
                      r_switch=r_switch, rtol=rtol, atol=rtol)
    if path.reason != "returned_to_real_axis":
        return None
    end = path.end
    if end.chart == CHART:
        # near infinity the sign of Re x decides: θ ≡ 0 is +∞, θ ≡ π is -∞
        return complex(end.x).real > 0
    return complex(end.x).real > p


def tail_coefficients(Q: PolyQ, n: int) -> list:
    """c_m with 1/Q(x) = -x^{-κ} Σ_m c_m x^{-m}, exact rationals."""
    k = Q.kappa
    # 1/Q = -x^{-κ} / (1 - Σ_{m=1}^{κ} a_{κ-m} x^{-m})
    u = [Fraction(0)] + [Q.a[k - m] for m in range(1, k + 1)]
    c = [Fraction(1)]
    for m in range(1, n):
        c.append(sum((u[i] * c[m - i] for i in range(1, min(m, k) + 1)), Fraction(0)))
    return c


def _tail(Q, xR: complex, tail_tol: float, max_terms: int = 12):
    """Integral of ds = dx/(iQ(x)) from xR to infinity by the 1/x expansion.

    Returns ``(value, terms_used)``.  Raises :class:`TailError` when a
    geometric bound on the dropped terms exceeds ``tail_tol``.
    """
    k = Q.kappa
    coef = tail_coefficients(Q, max_terms)
    R = abs(xR)
    # growth rate of c_m, estimated from the computed coefficients
    rho = max((abs(float(c)) ** (1.0 / m) for m, c in enumerate(coef) if m and c),
              default=0.0)
    total = 0j
    used = 1
    for m, cm in enumerate(coef):
        term = 1j * float(cm) * xR ** (1 - k - m) / (k - 1 + m)
        total += term
        if abs(term) >= tail_tol:
            used = m + 1
    ratio = rho / R
    if ratio >= 0.5:
        raise TailError(f"tail series diverges at |x|={R:g}")
    remainder = R ** (1 - k) * ratio**max_terms / (1 - ratio)
    if remainder > tail_tol:
        raise TailError(f"tail series not converged in {max_terms} terms at |x|={R:g}")
    return total, used


def blowup_time_integrated(res: SeparatrixResult, Q: PolyQ, R_esc: float | None = None,
                           tail_tol: float = 1e-15, *, rtol: float = 1e-13,
                           r_switch: float | None = None, max_doublings: int = 4):
    """Blowup time along H^j: integrated s up to |x| = R_esc plus the series tail.

    Returns ``(T, path, terms_used, R_esc_used, imag_residual)``; the last
    value is the imaginary part of the total, which vanishes on H^j.
    """
    pj = float(res.pj)
    if r_switch is None:
        from .poly import real_roots

        r_switch = default_r_switch(real_roots(Q, "dd"))
    R = R_esc or 10.0 * r_switch
    for _ in range(max_doublings + 1):
        path = trace_flow(Q, pj, IMAG, 1, StopRule(r_esc=R, max_steps=50000),
                          r_switch=r_switch, rtol=rtol, atol=rtol)
        if path.reason != "escaped":
            raise IntegrationError(f"path from p={pj!r} did not escape ({path.reason})", path)
        xR = complex(path.end.x)
        try:
            tail, nterms = _tail(Q, xR, tail_tol)
        except TailError:
            R *= 2.0
            continue
        total = complex(float(path.end.s), 0.0) + tail
        return total.real, path, nterms, R, total.imag
    raise TailError(f"tail did not converge up to R_esc={R:g}; choose a larger R_esc")


def locate_pj(Q: PolyQ, rs: RootSet, j: int, tol: float = 1e-13, *,
              rtol: float = 1e-13, r_switch: float | None = None,
              R_esc: float | None = None, tail_tol: float = 1e-15,
              max_steps: int = 20000) -> SeparatrixResult:
    """Bisect for p^j = H^j ∩ ℝ in (q^{j+1}, q^j).

    Orbits through real points between two roots are periodic around one of
    them; the side on which an orbit returns to the real axis tells which
    root it encircles, and H^j is the boundary between the two families.
    """
    rs.require_valid()
    if not 1 <= j <= Q.kappa - 1:
        raise ValueError(f"j must lie in 1..{Q.kappa - 1}")
    r_switch = r_switch or default_r_switch(rs)
    lo, hi = float(rs.q(j + 1)), float(rs.q(j))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        side = _returns_right(Q, mid, r_switch, rtol, max_steps)
        if side is None:
            if hi - lo < 1e-6:
                break  # numerically on the separatrix
            raise ClassifierError(
                f"orbit from p={mid!r} neither returned nor escaped in {max_steps} steps")
        if side:
            hi = mid
        else:
            lo = mid
    pj = 0.5 * (lo + hi)
    res = SeparatrixResult(j, ExReal(pj, "dd"), ExReal(0, "dd"), PhasePath(IMAG, 1, pj),
                           ExReal(hi - lo, "dd"), 0)
    T, path, nterms, R, imag = blowup_time_integrated(
        res, Q, R_esc, tail_tol, rtol=rtol, r_switch=r_switch)
    res.Tj_integrated = ExReal(T, "dd")
    res.path = path
    res.tail_terms_used = nterms
    res.r_esc = R
    res.tj_imag_residual = imag
    return res


# ---------------------------------------------------------------- portraits


def portrait(Q: PolyQ, rs: RootSet, flow: str, n_rays: int = 12, *,
             rtol: float = 1e-10, max_steps: int = 4000) -> list:
    """Representative orbits for a phase portrait of one flow."""
    r_switch = default_r_switch(rs)
    roots = [float(r) for r in rs.roots]
    paths = []
    if flow == IMAG:
        for j in range(1, Q.kappa):
            res = locate_pj(Q, rs, j, tol=1e-10, rtol=rtol)
            for d in (1, -1):
                paths.append(trace_flow(Q, float(res.pj), IMAG, d,
                                        StopRule(r_esc=50 * r_switch, max_steps=max_steps),
                                        r_switch=r_switch, rtol=rtol, atol=rtol))
        edges = [roots[0] + 2.0] + roots + [roots[-1] - 2.0]
        for a, b in zip(edges, edges[1:]):
            for frac in (0.25, 0.5, 0.75):
                x0 = a + frac * (b - a)
                paths.append(trace_flow(Q, x0, IMAG, 1,
                                        StopRule(real_axis=True, r_esc=50 * r_switch,
                                                 max_steps=max_steps),
                                        r_switch=r_switch, rtol=rtol, atol=rtol))
    else:
        rad = 0.75 * r_switch
        for i in range(n_rays):
            th = 2 * math.pi * (i + 0.5) / n_rays
            x0 = rad * complex(math.cos(th), math.sin(th))
            for d in (1, -1):
                paths.append(trace_flow(Q, x0, REAL, d,
                                        StopRule(r_esc=50 * r_switch, s_max=30.0,
                                                 max_steps=max_steps),
                                        r_switch=r_switch, rtol=rtol, atol=rtol))
    return paths
