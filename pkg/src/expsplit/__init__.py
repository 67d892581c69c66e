"""Numerical toolkit for exponentially small splitting in ε^{2(κ-1)} f''' + f' = Q(f)."""

__version__ = "0.1.0"
