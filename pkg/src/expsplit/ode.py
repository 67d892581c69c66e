"""Adaptive embedded Runge–Kutta 7(8) integrator (Fehlberg) with PI control.

States are 1-D numpy arrays.  With ``dtype=float`` everything runs in native
double precision; with ``dtype=object`` holding ``ExReal`` entries the same
code runs in extended precision because the tableau is stored exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction as Fr
from typing import Callable

import numpy as np

from .hiprec import ExReal


@dataclass(frozen=True)
class Tableau:
    """Embedded explicit Runge–Kutta pair; ``b`` propagates, ``b_err`` = b - b_low."""

    c: tuple
    a: tuple
    b: tuple
    b_err: tuple
    order: int

    def as_kind(self, kind: str):
        """Coefficients converted to ``float`` or to ``ExReal`` of a precision."""
        conv = float if kind == "double" else (lambda v: ExReal(v, kind))
        a = [np.array([conv(v) for v in row], dtype=object if kind != "double" else float)
             for row in self.a]
        b = np.array([conv(v) for v in self.b], dtype=object if kind != "double" else float)
        e = np.array([conv(v) for v in self.b_err], dtype=object if kind != "double" else float)
        return a, b, e


def _fehlberg78() -> Tableau:
    F = Fr
    c = (0, F(2, 27), F(1, 9), F(1, 6), F(5, 12), F(1, 2), F(5, 6), F(1, 6),
         F(2, 3), F(1, 3), 1, 0, 1)
    a = (
        (),
        (F(2, 27),),
        (F(1, 36), F(1, 12)),
        (F(1, 24), 0, F(1, 8)),
        (F(5, 12), 0, F(-25, 16), F(25, 16)),
        (F(1, 20), 0, 0, F(1, 4), F(1, 5)),
        (F(-25, 108), 0, 0, F(125, 108), F(-65, 27), F(125, 54)),
        (F(31, 300), 0, 0, 0, F(61, 225), F(-2, 9), F(13, 900)),
        (2, 0, 0, F(-53, 6), F(704, 45), F(-107, 9), F(67, 90), 3),
        (F(-91, 108), 0, 0, F(23, 108), F(-976, 135), F(311, 54), F(-19, 60),
         F(17, 6), F(-1, 12)),
        (F(2383, 4100), 0, 0, F(-341, 164), F(4496, 1025), F(-301, 82),
         F(2133, 4100), F(45, 82), F(45, 164), F(18, 41)),
        (F(3, 205), 0, 0, 0, 0, F(-6, 41), F(-3, 205), F(-3, 41), F(3, 41),
         F(6, 41), 0),
        (F(-1777, 4100), 0, 0, F(-341, 164), F(4496, 1025), F(-289, 82),
         F(2193, 4100), F(51, 82), F(33, 164), F(12, 41), 0, 1),
    )
    b = (0, 0, 0, 0, 0, F(34, 105), F(9, 35), F(9, 35), F(9, 280), F(9, 280), 0,
         F(41, 840), F(41, 840))
    b_low = (F(41, 840), 0, 0, 0, 0, F(34, 105), F(9, 35), F(9, 35), F(9, 280),
             F(9, 280), F(41, 840), 0, 0)
    b_err = tuple(F(x) - F(y) for x, y in zip(b, b_low))
    return Tableau(tuple(map(F, c)), tuple(tuple(map(F, r)) for r in a),
                   tuple(map(F, b)), b_err, 8)


FEHLBERG78 = _fehlberg78()


class StepSizeUnderflow(RuntimeError):
    """The controller asked for a step below the representable minimum."""


class RK78:
    """One-step driver for ``dy/dσ = f(y)`` (autonomous).

    Parameters
    ----------
    f : callable
        Right-hand side mapping a state array to its derivative.
    rtol, atol : float
        Mixed error tolerance per component.
    kind : {"double", "dd", "qd"}
        Arithmetic used for states.
    """

    def __init__(self, f: Callable, rtol: float = 1e-13, atol: float = 1e-13,
                 kind: str = "double", tableau: Tableau = FEHLBERG78):
        self.f = f
        self.rtol = rtol
        self.atol = atol
        self.kind = kind
        self.tab = tableau
        self._a, self._b, self._e = tableau.as_kind(kind)
        self._err_prev = 1e-4
        self.h_min = 1e-300

    def step(self, y: np.ndarray, h):
        """Take one step of size ``h``; return (new state, error norm)."""
        ks = [self.f(y)]
        for row in self._a[1:]:
            inc = np.dot(row, np.array(ks[: len(row)])) if len(row) else 0
            ks.append(self.f(y + h * inc))
        K = np.array(ks)
        y_new = y + h * np.dot(self._b, K)
        err = h * np.dot(self._e, K)
        scale = [self.atol + self.rtol * max(abs(float(u)), abs(float(v)))
                 for u, v in zip(y, y_new)]
        norm = max(abs(float(e)) / s for e, s in zip(err, scale))
        return y_new, norm

    def adaptive_step(self, y: np.ndarray, h: float):
        """Step with rejection until the error is acceptable.

        Returns ``(y_new, h_taken, h_next)``.
        """
        p = self.tab.order
        while True:
            if abs(h) < self.h_min:
                raise StepSizeUnderflow(f"step size {h:g} underflowed")
            hh = h if self.kind == "double" else ExReal(h, self.kind)
            y_new, err = self.step(y, hh)
            if np.isfinite(err) and err <= 1.0:
                err = max(err, 1e-10)
                fac = 0.9 * err ** (-0.7 / p) * self._err_prev ** (0.4 / p)
                self._err_prev = err
                return y_new, h, h * min(4.0, max(0.2, fac))
            if not np.isfinite(err):
                h *= 0.1
            else:
                h *= max(0.1, 0.9 * err ** (-1.0 / p))
