"""Measure the exponentially small splitting of the saddle-focus manifolds.

For small ε the equilibria (q^j, 0, 0) of the fast-time system are
saddle-foci with a one-dimensional manifold along the real eigenvalue
λ₁ ≈ ε^{κ-1} Q'(q^j).  The manifold of q^{j+1} and the manifold of q^j are
shot to the section x̃₂ = p^j in normal-form coordinates.  The difference of
their (ỹ₂, z̃₂) values there is the splitting, expected to behave like
ε^{-3κ/2} exp(-ε^{1-κ} T^j) C^j.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import canonical, taylor
from .hiprec import NCOMP, ExComplex, ExReal, log, sqrt
from .poly import PolyQ, RootSet, blowup_time_formula, evaluate, real_roots

DEFAULT_TOL = {"dd": 1e-28, "qd": 1e-45}


class SplitError(RuntimeError):
    """A splitting measurement could not be completed."""


class EquilibriumError(SplitError):
    """Newton failed for the equilibrium or its real eigenvalue."""


class NoCrossingError(SplitError):
    """A manifold did not reach the section within the time or step cap."""


class EventError(SplitError):
    """Newton on the section event did not converge."""


# --------------------------------------------------------------------- system
@dataclass(frozen=True)
class FlowSystem:
    """Fast-time slow-fast system for a given Q and ε.

    ẋ₂ = e1 Q(x₂ - e1 z₂), ẏ₂ = z₂, ż₂ = -y₂ + Q(x₂ - e1 z₂), e1 = ε^{κ-1}.
    """

    Q: PolyQ
    eps: ExReal
    e1: ExReal
    prec: str

    def rhs(self, v):
        return canonical.fast_rhs(self.Q, self.e1, v)

    def third_order_rhs(self, v):
        """(f, f', f'')' in slow time for e1² f''' + f' = Q(f)."""
        return canonical.third_order_rhs(self.Q, self.e1, v)

    def from_third_order(self, v):
        return canonical.from_third_order(self.e1, v)

    def nft(self, v):
        return canonical.nft(self.Q, self.e1, v)

    def nft_inverse(self, vt):
        return canonical.nft_inverse(self.Q, self.e1, vt)

    def linear_form(self, kind: str = "fast"):
        """(A, b, c) with rhs = A v + b Q(c·v) as nested ExReal lists."""
        z, one, e1 = ExReal(0, self.prec), ExReal(1, self.prec), self.e1
        if kind == "fast":
            A = [[z, z, z], [z, z, one], [z, -one, z]]
            return A, [e1, z, one], [one, z, -e1]
        if kind == "third":
            w = one / (e1 * e1)
            A = [[z, one, z], [z, z, one], [z, -w, z]]
            return A, [z, z, w], [one, z, z]
        raise ValueError(f"unknown system kind {kind!r}")


def build_system(Q: PolyQ, eps, prec: str = "qd") -> FlowSystem:
    eps = ExReal(eps, prec) if not isinstance(eps, ExReal) else ExReal(eps, prec)
    if not eps > 0:
        raise ValueError("eps must be positive")
    return FlowSystem(Q, eps, eps ** (Q.kappa - 1), prec)


# ------------------------------------------------------------- small algebra
def _solve3(M, rhs):
    """Gaussian elimination with partial pivoting on ExReal entries."""
    M = [list(row) + [r] for row, r in zip(M, rhs)]
    for col in range(3):
        piv = max(range(col, 3), key=lambda r: abs(float(M[r][col])))
        if float(M[piv][col]) == 0.0:
            raise SplitError("singular linear system")
        M[col], M[piv] = M[piv], M[col]
        for r in range(col + 1, 3):
            f = M[r][col] / M[col][col]
            M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    x = [None] * 3
    for r in (2, 1, 0):
        s = M[r][3]
        for c in range(r + 1, 3):
            s = s - M[r][c] * x[c]
        x[r] = s / M[r][r]
    return x


def _jacobian(sysm: FlowSystem, u):
    """DF = A + Q'(u) b cᵀ."""
    A, b, c = sysm.linear_form("fast")
    d = evaluate(sysm.Q, u, 1)
    return [[A[r][s] + d * b[r] * c[s] for s in range(3)] for r in range(3)]


def _taylor_shift(Q: PolyQ, u: ExReal):
    """Coefficients d_i with Q(u + h) = Σ d_i h^i."""
    coef = [ExReal(Fraction(a), u.prec) for a in Q.coefficients]
    n = len(coef)
    for i in range(n):
        for m in range(n - 2, i - 1, -1):
            coef[m] = coef[m] + u * coef[m + 1]
    return coef


# ---------------------------------------------------------------- equilibria
@dataclass(frozen=True)
class EquilibriumInfo:
    j: int
    point: tuple
    lambda1: ExReal
    lambda23: ExComplex
    v1: tuple
    manifold_kind: str
    newton_iterations: int = 0


def equilibrium(sysm: FlowSystem, rs: RootSet, j: int, maxit: int = 50) -> EquilibriumInfo:
    """Equilibrium near (q^j, 0, 0), its real eigenvalue and eigenvector.

    λ₁ comes from Newton on the characteristic cubic started at e1 Q'(q^j);
    the complex pair follows by deflation.
    """
    rs.require_valid()
    Q, prec = sysm.Q, sysm.prec
    k = NCOMP[prec]
    zero = ExReal(0, prec)
    v = [ExReal(rs.q(j), prec), zero, zero]
    its = 0
    for its in range(1, maxit + 1):
        F = sysm.rhs(v)
        J = _jacobian(sysm, v[0] - sysm.e1 * v[2])
        dv = _solve3(J, [-f for f in F])
        v = [a + b for a, b in zip(v, dv)]
        if max(abs(float(d)) for d in dv) <= 2.0 ** (-53 * k) * max(1.0, abs(float(v[0]))):
            break
    else:
        raise EquilibriumError(f"equilibrium Newton did not converge for j={j} (eps too large?)")
    res = max(abs(float(f)) for f in sysm.rhs(v))
    if res > 1e-10:
        raise EquilibriumError(f"equilibrium residual {res:.3g} for j={j} (eps too large?)")

    J = _jacobian(sysm, v[0] - sysm.e1 * v[2])
    tr = J[0][0] + J[1][1] + J[2][2]
    minors = (J[0][0] * J[1][1] - J[0][1] * J[1][0]
              + J[0][0] * J[2][2] - J[0][2] * J[2][0]
              + J[1][1] * J[2][2] - J[1][2] * J[2][1])
    det = (J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1])
           - J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0])
           + J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]))
    lam = sysm.e1 * evaluate(Q, v[0], 1)
    for _ in range(maxit):
        p = ((lam - tr) * lam + minors) * lam - det
        dp = (3 * lam - 2 * tr) * lam + minors
        step = p / dp
        lam = lam - step
        if abs(float(step)) <= 2.0 ** (-53 * k) * abs(float(lam)):
            break
    else:
        raise EquilibriumError(f"eigenvalue Newton did not converge for j={j} (eps too large?)")
    beta = lam - tr
    gamma = minors + lam * beta
    disc = gamma - beta * beta / 4
    if not disc > 0:
        raise EquilibriumError(f"equilibrium j={j} is not a saddle-focus at this eps")
    lam23 = ExComplex(-beta / 2, sqrt(disc))

    # null vector of J - λ₁ I from a cross product of two rows
    r1 = [J[1][0], J[1][1] - lam, J[1][2]]
    r2 = [J[2][0], J[2][1], J[2][2] - lam]
    w = [r1[1] * r2[2] - r1[2] * r2[1],
         r1[2] * r2[0] - r1[0] * r2[2],
         r1[0] * r2[1] - r1[1] * r2[0]]
    if float(w[0]) == 0.0:
        raise EquilibriumError("real eigenvector has no x component")
    v1 = tuple(c / w[0] for c in w)
    kind = "stable" if lam < 0 else "unstable"
    return EquilibriumInfo(j, tuple(v), lam, lam23, v1, kind, its)


def manifold_coefficients(sysm: FlowSystem, eq: EquilibriumInfo, order: int) -> list:
    """Taylor coefficients w_1..w_order of the 1-D manifold W(σ) = point + Σ w_m σ^m.

    Parametrization method: W(σ e^{λ₁τ}) solves the flow, giving
    (DF - mλ₁) w_m = -b N_m order by order, with N_m the part of [Q(c·W)]_m
    built from lower orders.  ``w_1 = v1``.
    """
    A, b, c = sysm.linear_form("fast")
    u0 = sum((c[s] * eq.point[s] for s in range(3)), ExReal(0, sysm.prec))
    d = _taylor_shift(sysm.Q, u0)
    J = _jacobian(sysm, u0)
    W = [None, list(eq.v1)]
    U = [None, sum((c[s] * eq.v1[s] for s in range(3)), ExReal(0, sysm.prec))]
    zero = ExReal(0, sysm.prec)
    for m in range(2, order + 1):
        # [δ^i]_m for δ = Σ_{l<m} U_l σ^l, i ≥ 2
        pw = [zero] * (m + 1)
        for l in range(1, m):
            pw[l] = U[l]
        N = zero
        cur = pw
        for i in range(2, len(d)):
            nxt = [zero] * (m + 1)
            for a in range(1, m + 1):
                if not cur[a]:
                    continue
                for l in range(1, m - a + 1):
                    if l < m:
                        nxt[a + l] = nxt[a + l] + cur[a] * U[l]
            cur = nxt
            N = N + d[i] * cur[m]
        M = [[J[r][s] - (m * eq.lambda1 if r == s else zero) for s in range(3)]
             for r in range(3)]
        w = _solve3(M, [-b[r] * N for r in range(3)])
        W.append(w)
        U.append(sum((c[s] * w[s] for s in range(3)), zero))
    return W[1:]


def seed_point(sysm: FlowSystem, eq: EquilibriumInfo, sigma, order: int = 6):
    """Point W(σ) on the 1-D manifold; ``order=1`` is point + σ v1."""
    sigma = ExReal(sigma, sysm.prec)
    W = manifold_coefficients(sysm, eq, order) if order > 1 else [list(eq.v1)]
    out = list(eq.point)
    for r in range(3):
        acc = ExReal(0, sysm.prec)
        for w in reversed(W):
            acc = (acc + w[r]) * sigma
        out[r] = out[r] + acc
    return tuple(out)


# ------------------------------------------------------------ numba packing
def _arr(x: ExReal, k: int) -> np.ndarray:
    return np.array(ExReal(x, {2: "dd", 4: "qd"}[k])._c, dtype=float)


def _pack(vals, k):
    return np.stack([_arr(v, k) for v in vals])


def _unpack(arr, prec):
    return tuple(ExReal.from_components(arr[r], prec) for r in range(arr.shape[0]))


def _inv_table(n, prec):
    k = NCOMP[prec]
    out = np.zeros((n + 1, k))
    for m in range(1, n + 1):
        out[m] = _arr(ExReal(Fraction(1, m), prec), k)
    return out


@dataclass
class _Kernel:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    qc: np.ndarray
    dqc: np.ndarray
    ddqc: np.ndarray
    e1sq: np.ndarray
    k: int


def _kernel_inputs(sysm: FlowSystem, kind: str = "fast", backward: bool = False) -> _Kernel:
    k = NCOMP[sysm.prec]
    A, b, c = sysm.linear_form(kind)
    sgn = -1 if backward else 1
    An = np.stack([_pack([sgn * a for a in row], k) for row in A])
    bn = _pack([sgn * x for x in b], k)
    cn = _pack(c, k)
    coef = [ExReal(Fraction(a), sysm.prec) for a in sysm.Q.coefficients]
    dco = [ExReal(Fraction(a), sysm.prec) for a in sysm.Q.derivative_coefficients(1)]
    ddco = [ExReal(Fraction(a), sysm.prec) for a in sysm.Q.derivative_coefficients(2)]
    if not ddco:
        ddco = [ExReal(0, sysm.prec)]
    return _Kernel(An, bn, cn, _pack(coef, k), _pack(dco, k), _pack(ddco, k),
                   _arr(sysm.e1 * sysm.e1, k), k)


@dataclass
class ShotResult:
    hit: tuple          # (x₂, y₂, z₂) at the section
    tau: float
    steps: int
    section_residual: float


def shoot_to_section(sysm: FlowSystem, v0, p, *, backward: bool, tol: float,
                     tau_max: float, max_steps: int = 200000,
                     step_scale: float = 1.0) -> ShotResult:
    """Integrate from ``v0`` until x̃₂ = p, forwards or backwards in τ."""
    kin = _kernel_inputs(sysm, "fast", backward)
    n = taylor.order_for(tol)
    status, V, tau, steps, res = taylor.shoot(
        _pack(v0, kin.k), kin.A, kin.b, kin.c, kin.qc, kin.dqc, kin.ddqc,
        kin.e1sq, _arr(ExReal(p, sysm.prec), kin.k), _inv_table(n, sysm.prec), n,
        tol, tau_max, max_steps, step_scale, kin.k)
    if status in (taylor.STATUS_TIME_CAP, taylor.STATUS_STEP_CAP):
        raise NoCrossingError(
            f"no crossing of the section within tau={tau:.4g}, steps={steps}")
    if status == taylor.STATUS_NEWTON:
        raise EventError(f"section Newton failed (residual {res:.3g})")
    return ShotResult(_unpack(V, sysm.prec), tau, steps, res)


def integrate(sysm: FlowSystem, v0, duration: float, *, kind: str = "fast",
              tol: float | None = None, step_scale: float = 1.0):
    """Integrate for a fixed time (negative means backwards); returns (state, steps)."""
    tol = tol or DEFAULT_TOL[sysm.prec]
    kin = _kernel_inputs(sysm, kind, duration < 0)
    n = taylor.order_for(tol)
    V, steps = taylor.integrate_fixed(_pack(v0, kin.k), kin.A, kin.b, kin.c, kin.qc,
                                      _inv_table(n, sysm.prec), n, tol, abs(duration),
                                      step_scale, kin.k)
    return _unpack(V, sysm.prec), steps


# ------------------------------------------------------------- measurement
@dataclass
class SplitOptions:
    prec: str = "qd"
    tol: float | None = None
    seed_delta: float = 1e-8
    seed_order: int = 6
    robustness: bool = True
    max_steps: int = 200000
    pj: object = None


@dataclass
class SplitRecord:
    """One measurement of (Δỹ₂, Δz̃₂) at x̃₂ = p^j.

    ``rel_change_delta`` and ``rel_change_tol`` are the relative changes of
    |Δ| under δ → δ/2 and tol → tol/10 (NaN when the checks were skipped).
    """

    eps: ExReal
    j: int
    pj: ExReal
    dy: ExReal
    dz: ExReal
    seed_delta: ExReal
    integrator_tol: ExReal
    section_residual: ExReal
    kappa: int = 0
    status: str = "ok"
    error_estimate: float = float("nan")
    rel_change_delta: float = float("nan")
    rel_change_tol: float = float("nan")
    steps: tuple = ()
    taus: tuple = ()

    @property
    def abs(self) -> ExReal:
        return sqrt(self.dy * self.dy + self.dz * self.dz)

    @property
    def ln_abs(self) -> float:
        return float(log(self.abs))

    def row(self) -> dict:
        return {
            "kappa": self.kappa, "j": self.j, "eps": self.eps.to_string(20),
            "pj": self.pj.to_string(20), "dy": self.dy.to_string(30),
            "dz": self.dz.to_string(30), "abs": self.abs.to_string(30),
            "ln_abs": repr(self.ln_abs), "seed_delta": repr(float(self.seed_delta)),
            "tol": repr(float(self.integrator_tol)), "status": self.status,
        }


SPLIT_COLUMNS = ("kappa", "j", "eps", "pj", "dy", "dz", "abs", "ln_abs",
                 "seed_delta", "tol", "status")


def _p_of(Q: PolyQ, rs: RootSet, j: int, opts: SplitOptions) -> ExReal:
    if opts.pj is not None:
        return ExReal(opts.pj, opts.prec)
    from .cflow import locate_pj

    return ExReal(locate_pj(Q, rs, j).pj, opts.prec)


def _one_side(sysm, rs, l, sign, p, delta, order, tol, max_steps, step_scale=1.0):
    eq = equilibrium(sysm, rs, l)
    v0 = seed_point(sysm, eq, sign * delta, order)
    backward = eq.manifold_kind == "stable"
    tau_max = 20.0 * (math.log(1.0 / delta) + 40.0) / abs(float(eq.lambda1))
    shot = shoot_to_section(sysm, v0, p, backward=backward, tol=tol,
                            tau_max=tau_max, max_steps=max_steps, step_scale=step_scale)
    return shot, sysm.nft(shot.hit)


def _raw_delta(sysm, rs, j, p, delta, order, tol, max_steps):
    lower, tl = _one_side(sysm, rs, j + 1, +1, p, delta, order, tol, max_steps)
    upper, tu = _one_side(sysm, rs, j, -1, p, delta, order, tol, max_steps)
    dy = tl[1] - tu[1]
    dz = tl[2] - tu[2]
    return dy, dz, lower, upper


def measure_splitting(Q: PolyQ, eps, j: int, opts: SplitOptions | None = None,
                      rs: RootSet | None = None) -> SplitRecord:
    """Splitting (Δỹ₂, Δz̃₂) = (manifold of q^{j+1}) - (manifold of q^j) at x̃₂ = p^j.

    With ``opts.robustness`` the measurement is repeated with δ/2 and with
    tol/10; their spread is the error estimate, and a result smaller than
    100 times that estimate is reported with status ``"underflow"``.
    """
    opts = opts or SplitOptions()
    prec = opts.prec
    rs = rs or real_roots(Q, prec)
    rs.require_valid()
    if not 1 <= j <= Q.kappa - 1:
        raise ValueError(f"j must lie in 1..{Q.kappa - 1}")
    tol = opts.tol or DEFAULT_TOL[prec]
    sysm = build_system(Q, eps, prec)
    p = _p_of(Q, rs, j, opts)
    delta = opts.seed_delta
    dy, dz, lower, upper = _raw_delta(sysm, rs, j, p, delta, opts.seed_order, tol,
                                      opts.max_steps)
    mag = math.hypot(float(dy), float(dz))
    steps_total = lower.steps + upper.steps
    err = steps_total * tol
    rel_d = rel_t = float("nan")
    if opts.robustness:
        dy2, dz2, *_ = _raw_delta(sysm, rs, j, p, delta / 2, opts.seed_order, tol,
                                  opts.max_steps)
        dy3, dz3, *_ = _raw_delta(sysm, rs, j, p, delta, opts.seed_order, tol / 10,
                                  opts.max_steps)
        dd = math.hypot(float(dy2 - dy), float(dz2 - dz))
        dt = math.hypot(float(dy3 - dy), float(dz3 - dz))
        err = max(err, dd, dt)
        if mag > 0:
            rel_d, rel_t = dd / mag, dt / mag
    status = "ok" if mag > 100.0 * err else "underflow"
    return SplitRecord(
        eps=sysm.eps, j=j, pj=p, dy=dy, dz=dz,
        seed_delta=ExReal(delta, prec), integrator_tol=ExReal(tol, prec),
        section_residual=ExReal(max(lower.section_residual, upper.section_residual), prec),
        kappa=Q.kappa, status=status, error_estimate=err,
        rel_change_delta=rel_d, rel_change_tol=rel_t,
        steps=(lower.steps, upper.steps), taus=(lower.tau, upper.tau),
    )


# --------------------------------------------------------------------- fit
@dataclass
class FitReport:
    """Regression ln|Δ| = ln C + a ln ε - T ε^{1-κ} + Σ_{m≤M} b_m ε^m.

    The ε^m terms absorb the smooth correction Ξ(ε) in the exponent.  M is
    ``correction_order``; by default the largest value ≤ 2 that leaves three
    residual degrees of freedom.  All coefficients come from one joint least
    squares solve, which is the fixed point of alternating the regression of
    the a-corrected data on ε^{1-κ} (for T) with the regression of the
    T-corrected data on ln ε (for a).  The result of a single such pass is
    kept in ``single_pass_T`` / ``single_pass_exponent``.  ``variants`` maps
    every feasible M to its (T, a).
    """

    j: int
    kappa: int
    eps_grid: list
    fitted_T: float
    fitted_prefactor_exponent: float
    intercept: float
    residuals: list
    reference_T: ExReal
    correction_order: int = 0
    correction_coefficients: list = field(default_factory=list)
    single_pass_T: float = float("nan")
    single_pass_exponent: float = float("nan")
    condition_number: float = float("nan")
    ill_conditioned: bool = False
    implied_lnC: list = field(default_factory=list)
    variants: dict = field(default_factory=dict)
    records: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "j": self.j, "kappa": self.kappa, "eps_grid": self.eps_grid,
            "fitted_T": self.fitted_T, "reference_T": self.reference_T.to_string(30),
            "prefactor_exponent": self.fitted_prefactor_exponent,
            "expected_prefactor_exponent": -1.5 * self.kappa,
            "intercept_lnC": self.intercept, "residuals": self.residuals,
            "correction_order": self.correction_order,
            "correction_coefficients": self.correction_coefficients,
            "single_pass_T": self.single_pass_T,
            "single_pass_exponent": self.single_pass_exponent,
            "condition_number": self.condition_number,
            "ill_conditioned": self.ill_conditioned, "implied_lnC": self.implied_lnC,
            "variants": {str(m): {"T": t, "prefactor_exponent": a}
                         for m, (t, a) in self.variants.items()},
        }


def _slope(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xm = x - x.mean()
    s = float(xm @ (y - y.mean()) / (xm @ xm))
    return s, float(y.mean() - s * x.mean())


def _design(eps, kappa, order):
    cols = [np.ones_like(eps), np.log(eps), -(eps ** (1 - kappa))]
    cols += [eps ** m for m in range(1, order + 1)]
    return np.column_stack(cols)


def default_correction_order(npoints: int) -> int:
    return max(0, min(2, npoints - 6))


def fit_splitting(eps, ln_abs, kappa: int, j: int, reference_T,
                  correction_order: int | None = None) -> FitReport:
    eps = np.asarray([float(e) for e in eps])
    y = np.asarray(ln_abs, float)
    if eps.size < 6:
        raise ValueError("at least 6 grid points are required")
    if correction_order is None:
        correction_order = default_correction_order(eps.size)
    if eps.size < correction_order + 4:
        raise ValueError("too few grid points for the requested correction order")
    variants = {}
    coef = cond = None
    for m in range(0, max(correction_order, eps.size - 4) + 1):
        if m > 2 and m != correction_order:
            continue
        M = _design(eps, kappa, m)
        c, *_ = np.linalg.lstsq(M, y, rcond=None)
        variants[m] = (float(c[2]), float(c[1]))
        if m == correction_order:
            coef = c
            cond = float(np.linalg.cond(M / np.linalg.norm(M, axis=0)))
    M = _design(eps, kappa, correction_order)
    resid = (y - M @ coef).tolist()
    X = eps ** (1 - kappa)
    L = np.log(eps)
    s_T, _ = _slope(X, y)
    s_a, _ = _slope(L, y - s_T * X)
    Tref = reference_T if isinstance(reference_T, ExReal) else ExReal(reference_T)
    lnC = (y + 1.5 * kappa * L + float(Tref) * X).tolist()
    return FitReport(
        j, kappa, eps.tolist(), float(coef[2]), float(coef[1]), float(coef[0]), resid,
        Tref, correction_order, [float(v) for v in coef[3:]], -s_T, s_a, cond,
        cond > 1e8, lnC, variants)


def headroom(kappa: int, T: float, eps) -> float:
    """min over the grid of exp(-ε^{1-κ} T), the smallest splitting scale."""
    return min(math.exp(-float(e) ** (1 - kappa) * T) for e in eps)


def _measure_task(args):
    Q, e, j, opts = args
    return measure_splitting(Q, e, j, opts)


def sweep(Q: PolyQ, j: int, eps_grid, opts: SplitOptions | None = None,
          workers: int = 1) -> list:
    """Measure at every grid point; results are in grid order."""
    opts = opts or SplitOptions()
    if opts.pj is None:
        rs = real_roots(Q, opts.prec)
        opts = replace(opts, pj=_p_of(Q, rs, j, opts))
    tasks = [(Q, e, j, opts) for e in eps_grid]
    if workers <= 1:
        return [_measure_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_measure_task, tasks))


def sweep_and_fit(Q: PolyQ, j: int, eps_grid, opts: SplitOptions | None = None,
                  workers: int = 1, correction_order: int | None = None) -> FitReport:
    opts = opts or SplitOptions()
    if len(eps_grid) < 6:
        raise ValueError("at least 6 grid points are required")
    records = sweep(Q, j, eps_grid, opts, workers)
    bad = [r for r in records if r.status != "ok"]
    if bad:
        raise SplitError(
            f"{len(bad)} measurement(s) underflowed, e.g. eps={float(bad[0].eps):.4g}")
    ref = blowup_time_formula(real_roots(Q, opts.prec), j)
    rep = fit_splitting([r.eps for r in records], [r.ln_abs for r in records],
                        Q.kappa, j, ref, correction_order)
    rep.records = records
    return rep
