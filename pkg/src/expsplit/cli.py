"""Command-line front end: ``expsplit <command> [options]``.

Exit codes: 0 ok, 2 invalid input, 3 numerical failure, 4 precision
underflow in a splitting measurement.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_UNDERFLOW = 0, 2, 3, 4


class InputError(ValueError):
    pass


# ------------------------------------------------------------------ parsing
def parse_eps_grid(text: str) -> list:
    """``a:b:n`` (linear) or ``a:b:nlog`` (log-spaced) into a list of floats."""
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"bad --eps-grid {text!r}; expected a:b:n or a:b:nlog")
    a, b, n = parts
    logspace = n.endswith("log")
    try:
        a, b = float(a), float(b)
        n = int(n[:-3] if logspace else n)
    except ValueError as exc:
        raise InputError(f"bad --eps-grid {text!r}") from exc
    if n < 1 or a <= 0 or b <= 0:
        raise InputError("--eps-grid needs positive bounds and n >= 1")
    if n == 1:
        return [a]
    grid = np.geomspace(a, b, n) if logspace else np.linspace(a, b, n)
    return [float(e) for e in grid]


def parse_range(text: str) -> tuple:
    try:
        a, b = (int(v) for v in text.split(":"))
    except ValueError as exc:
        raise InputError(f"bad range {text!r}; expected a:b") from exc
    if not 0 < a < b:
        raise InputError(f"bad range {text!r}; need 0 < a < b")
    return a, b


def read_config(path: str) -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}:{n}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


SPLIT_HELP = """\
split.csv columns: kappa, j, eps, pj, dy, dz, abs, ln_abs, seed_delta, tol, status.
dy, dz are the differences (manifold of q^{j+1}) - (manifold of q^j) of the
normal-form coordinates at x~2 = p^j; abs = sqrt(dy^2 + dz^2); status is
"ok" or "underflow" (result below 100x its error estimate, exit code 4)."""

FIT_HELP = SPLIT_HELP + """

fit.json keys: fitted_T, reference_T, prefactor_exponent,
expected_prefactor_exponent, intercept_lnC, residuals, correction_order,
correction_coefficients, single_pass_T, single_pass_exponent,
condition_number, ill_conditioned, implied_lnC, variants.
fit.svg: ln|Delta| against eps^(1-kappa) with the fitted curve."""


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="key=value file supplying any flag; flags win")
    common.add_argument("--out", default=".", metavar="DIR", help="output directory")
    common.add_argument("--precision", choices=("dd", "qd"), default=None,
                        help="extended precision format")

    poly = argparse.ArgumentParser(add_help=False)
    poly.add_argument("--poly", required=False, default=None,
                      help='polynomial Q with leading term -f^kappa, e.g. "-f^3+f"')

    p = argparse.ArgumentParser(prog="expsplit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    s = sub.add_parser("roots", parents=[common, poly], help="roots of Q and Q' there",
                       epilog="roots.csv columns: l, q, dQ (q^1 > ... > q^kappa).",
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    s.set_defaults(func=cmd_roots)

    s = sub.add_parser(
        "tj", parents=[common, poly], help="blowup times T^j and crossing points p^j",
        epilog="tj.csv columns: j, T_formula, T_integrated, rel_diff, pj, "
               "tail_terms, imag_residual.",
        formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--j", type=int, default=None, help="single index (default: all)")
    s.add_argument("--tol", type=float, default=1e-13, help="bisection width for p^j")
    s.set_defaults(func=cmd_tj)

    s = sub.add_parser(
        "portrait", parents=[common, poly], help="phase portraits of the complex flows",
        epilog="portrait_<flow>.csv columns: path, flow, direction, s, re, im, chart.\n"
               "portrait_<flow>.svg: the same orbits in the complex x-plane.",
        formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--flow", choices=("real", "imaginary", "both"), default="both")
    s.add_argument("--rays", type=int, default=12, help="real-flow starting rays")
    s.add_argument("--tol", type=float, default=1e-10, help="integrator rtol")
    s.set_defaults(func=cmd_portrait)

    s = sub.add_parser(
        "series", parents=[common], help="inner formal series and Gevrey diagnostic",
        epilog="series.csv columns: alpha, y_num, y_den, z_num, z_den, log_abs_phi_pow\n"
               "(log_abs_phi_pow = log|phi_alpha|^(1/alpha), empty when phi_alpha = 0).\n"
               "gevrey.json: slope, intercept, r_squared, fit_range.\n"
               "series.svg: log|phi_alpha|^(1/alpha) against log alpha.",
        formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--kappa", type=int, default=2)
    s.add_argument("--order", type=int, default=80)
    s.add_argument("--fit-range", default=None, help="a:b (default: order/2:order)")
    s.set_defaults(func=cmd_series)

    for name, func, helptext, epilog in (
            ("split", cmd_split, "measure the splitting over an eps grid", SPLIT_HELP),
            ("fit", cmd_fit, "measure and fit the splitting law", FIT_HELP)):
        s = sub.add_parser(name, parents=[common, poly], help=helptext, epilog=epilog,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        s.add_argument("--j", type=int, default=1)
        s.add_argument("--eps-grid", default=None, help="a:b:n or a:b:nlog")
        s.add_argument("--tol", type=float, default=None, help="Taylor local tolerance")
        s.add_argument("--seed-delta", type=float, default=1e-8)
        s.add_argument("--order", type=int, default=6, help="manifold seed order")
        s.add_argument("--workers", type=int, default=1)
        s.add_argument("--no-robustness", action="store_true",
                       help="skip the delta/2 and tol/10 repeats")
        if name == "fit":
            s.add_argument("--correction-order", type=int, default=None,
                           help="number of eps^m correction terms in the fit")
        s.set_defaults(func=func)

    s = sub.add_parser("selftest", parents=[common], help="run the built-in property checks")
    s.add_argument("--seed", type=int, default=20240601)
    s.add_argument("--count", type=int, default=20, help="random cases per check")
    s.set_defaults(func=cmd_selftest)
    return p


def _join_poly(argv) -> list:
    """Glue ``--poly -f^2+1`` into ``--poly=-f^2+1`` so argparse keeps the sign."""
    argv = list(sys.argv[1:] if argv is None else argv)
    out = []
    i = 0
    while i < len(argv):
        if argv[i] == "--poly" and i + 1 < len(argv):
            out.append(f"--poly={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    argv = _join_poly(argv)
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            raise InputError(f"cannot read config: {exc}") from exc
        subp = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in subp._actions}
        for key, value in cfg.items():
            if key not in known or key in ("config", "help", "func"):
                raise InputError(f"unknown config key {key!r} for {args.command}")
            if isinstance(known[key], argparse._StoreTrueAction):
                value = value.lower() in ("1", "true", "yes", "on")
            subp.set_defaults(**{key: value})
        args = parser.parse_args(argv)
    return args


# ----------------------------------------------------------------- helpers
def _out(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _table(header, rows) -> str:
    rows = [[str(c) for c in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def _poly(args):
    from .poly import PolyQ, real_roots

    if not args.poly:
        raise InputError("--poly is required")
    Q = PolyQ.parse(args.poly)
    rs = real_roots(Q, args.precision or "qd")
    if not rs.valid:
        raise InputError("; ".join(rs.failures))
    return Q, rs


# ---------------------------------------------------------------- commands
def cmd_roots(args) -> int:
    Q, rs = _poly(args)
    rows = [(l, rs.q(l).to_string(30), rs.dq(l).to_string(30))
            for l in range(1, Q.kappa + 1)]
    _write_csv(_out(args, "roots.csv"), ("l", "q", "dQ"), rows)
    print(f"Q = {Q}")
    print(_table(("l", "q", "dQ"), rows))
    return EXIT_OK


def cmd_tj(args) -> int:
    from .cflow import locate_pj
    from .poly import blowup_time_formula

    Q, rs = _poly(args)
    js = [args.j] if args.j else list(range(1, Q.kappa))
    if any(not 1 <= j < Q.kappa for j in js):
        raise InputError(f"--j must lie in 1..{Q.kappa - 1}")
    rows = []
    for j in js:
        Tf = blowup_time_formula(rs, j)
        res = locate_pj(Q, rs, j, tol=args.tol)
        Ti = float(res.Tj_integrated)
        rel = abs(Ti - float(Tf)) / float(Tf)
        rows.append((j, Tf.to_string(20), repr(Ti), f"{rel:.3e}", repr(float(res.pj)),
                     res.tail_terms_used, f"{res.tj_imag_residual:.3e}"))
    header = ("j", "T_formula", "T_integrated", "rel_diff", "pj", "tail_terms",
              "imag_residual")
    _write_csv(_out(args, "tj.csv"), header, rows)
    print(f"Q = {Q}")
    print(_table(header, rows))
    return EXIT_OK


def cmd_portrait(args) -> int:
    from .cflow import IMAG, REAL, default_r_switch, portrait
    from .svg import Plot

    Q, rs = _poly(args)
    flows = {"real": [REAL], "imaginary": [IMAG], "both": [REAL, IMAG]}[args.flow]
    lim = 2.0 * default_r_switch(rs)
    for flow in flows:
        paths = portrait(Q, rs, flow, args.rays, rtol=args.tol)
        rows = []
        plot = Plot(title=f"{flow}-time flow of x' = Q(x), Q = {Q}", xlabel="Re x",
                    ylabel="Im x", equal_aspect=True, xlim=(-lim, lim), ylim=(-lim, lim))
        for i, path in enumerate(paths):
            for _, s, re, im, chart in path.rows():
                rows.append((i, flow, path.direction, repr(s), repr(re), repr(im), chart))
            xs = path.x_values()
            plot.add(xs.real, xs.imag, color="#1f77b4" if path.direction > 0 else "#d62728")
        roots = [float(r) for r in rs.roots]
        plot.add(roots, [0.0] * len(roots), color="black", markers=True, line=False)
        tag = "real" if flow == REAL else "imaginary"
        _write_csv(_out(args, f"portrait_{tag}.csv"),
                   ("path", "flow", "direction", "s", "re", "im", "chart"), rows)
        plot.save(_out(args, f"portrait_{tag}.svg"))
        print(f"{tag}: {len(paths)} paths, {len(rows)} samples")
    return EXIT_OK


def cmd_series(args) -> int:
    from .series import gevrey_diagnostic, log_abs_phi, phi_coefficients
    from .svg import Plot

    if args.kappa < 2:
        raise InputError("--kappa must be at least 2")
    if args.order < 10:
        raise InputError("--order must be at least 10")
    a, b = parse_range(args.fit_range) if args.fit_range else (args.order // 2, args.order)
    if b > args.order:
        raise InputError("--fit-range exceeds --order")
    sp = phi_coefficients(args.kappa, args.order)
    rows, xs, ys = [], [], []
    for n in range(args.order + 1):
        y, z = Fraction(sp.y_coeffs[n]), Fraction(sp.z_coeffs[n])
        la = log_abs_phi(y, z)
        val = la / n if n > 0 and math.isfinite(la) else None
        if val is not None:
            xs.append(math.log(n))
            ys.append(val)
        rows.append((n, y.numerator, y.denominator, z.numerator, z.denominator,
                     "" if val is None else repr(val)))
    _write_csv(_out(args, "series.csv"),
               ("alpha", "y_num", "y_den", "z_num", "z_den", "log_abs_phi_pow"), rows)
    rep = gevrey_diagnostic(sp, a, b)
    report = {"kappa": args.kappa, "order": args.order, "fit_range": [a, b],
              "slope": rep.slope, "intercept": rep.intercept, "r_squared": rep.r_squared,
              "heuristic": rep.heuristic}
    with open(_out(args, "gevrey.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    fx = [math.log(a), math.log(b)]
    plot = Plot(title=f"inner series, kappa = {args.kappa}", xlabel="log alpha",
                ylabel="log |phi_alpha|^(1/alpha)")
    plot.add(xs, ys, "coefficients", markers=True, line=False)
    plot.add(fx, [rep.slope * x + rep.intercept for x in fx], f"fit, slope {rep.slope:.3f}")
    plot.save(_out(args, "series.svg"))
    print(_table(("kappa", "order", "fit_range", "slope", "r_squared"),
                 [(args.kappa, args.order, f"{a}:{b}", f"{rep.slope:.4f}",
                   f"{rep.r_squared:.5f}")]))
    return EXIT_OK


def _run_sweep(args):
    from .poly import blowup_time_formula
    from .split import SplitOptions, headroom, sweep

    Q, rs = _poly(args)
    if not 1 <= args.j < Q.kappa:
        raise InputError(f"--j must lie in 1..{Q.kappa - 1}")
    if not args.eps_grid:
        raise InputError("--eps-grid is required")
    grid = parse_eps_grid(args.eps_grid)
    T = float(blowup_time_formula(rs, args.j))
    bound = headroom(Q.kappa, T, grid)
    print(f"smallest exp(-eps^(1-kappa) T^{args.j}) on the grid: {bound:.3e}"
          f" (T^{args.j} = {T:.12g})", flush=True)
    if bound < 1e-45:
        print("warning: below 1e-45, expect underflow", file=sys.stderr)
    opts = SplitOptions(prec=args.precision or "qd", tol=args.tol,
                        seed_delta=args.seed_delta, seed_order=args.order,
                        robustness=not args.no_robustness)
    records = sweep(Q, args.j, grid, opts, workers=args.workers)
    from .split import SPLIT_COLUMNS

    rows = [[r.row()[c] for c in SPLIT_COLUMNS] for r in records]
    _write_csv(_out(args, "split.csv"), SPLIT_COLUMNS, rows)
    print(_table(("eps", "abs", "ln_abs", "rel_delta", "rel_tol", "status"),
                 [(f"{float(r.eps):.6g}", f"{float(r.abs):.6e}", f"{r.ln_abs:.6f}",
                   f"{r.rel_change_delta:.1e}", f"{r.rel_change_tol:.1e}", r.status)
                  for r in records]))
    return Q, rs, records


def cmd_split(args) -> int:
    _, _, records = _run_sweep(args)
    return EXIT_UNDERFLOW if any(r.status != "ok" for r in records) else EXIT_OK


def cmd_fit(args) -> int:
    from .poly import blowup_time_formula
    from .split import fit_splitting
    from .svg import Plot

    Q, rs, records = _run_sweep(args)
    if any(r.status != "ok" for r in records):
        print("underflowed measurements; no fit", file=sys.stderr)
        return EXIT_UNDERFLOW
    rep = fit_splitting([r.eps for r in records], [r.ln_abs for r in records], Q.kappa,
                        args.j, blowup_time_formula(rs, args.j), args.correction_order)
    d = rep.as_dict()
    d["poly"] = str(Q)
    with open(_out(args, "fit.json"), "w", encoding="utf-8") as fh:
        json.dump(d, fh, indent=2)
        fh.write("\n")
    X = [e ** (1 - Q.kappa) for e in rep.eps_grid]
    ys = [r.ln_abs for r in records]
    fitted = [y - r for y, r in zip(ys, rep.residuals)]
    plot = Plot(title=f"splitting, Q = {Q}, j = {args.j}", xlabel="eps^(1-kappa)",
                ylabel="ln |Delta|")
    plot.add(X, ys, "measured", markers=True, line=False)
    plot.add(X, fitted, f"fit, T = {rep.fitted_T:.5f}")
    plot.save(_out(args, "fit.svg"))
    print(_table(("fitted_T", "reference_T", "prefactor_exponent", "expected",
                  "correction_order"),
                 [(f"{rep.fitted_T:.6f}", f"{float(rep.reference_T):.6f}",
                   f"{rep.fitted_prefactor_exponent:.4f}", f"{-1.5 * Q.kappa:g}",
                   rep.correction_order)]))
    if rep.ill_conditioned:
        print(f"warning: ill-conditioned fit (cond {rep.condition_number:.3g})",
              file=sys.stderr)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selfcheck import run_all

    results = run_all(seed=args.seed, count=args.count, prec=args.precision or "qd")
    print(_table(("check", "result", "detail"),
                 [(name, "PASS" if ok else "FAIL", detail) for name, ok, detail in results]))
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NUMERIC


# -------------------------------------------------------------------- main
def run(argv=None) -> int:
    from .cflow import ClassifierError, IntegrationError, TailError
    from .hiprec import HiPrecError
    from .poly import PolyError
    from .split import SplitError

    try:
        args = parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    except (InputError, PolyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (IntegrationError, ClassifierError, TailError, SplitError, HiPrecError,
            ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
