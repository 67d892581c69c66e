"""The slow-fast form of ε^{2(κ-1)} f''' + f' = Q(f) and its normal-form map.

Throughout, ``e1`` is ε^{κ-1} and states are triples (x₂, y₂, z₂) in fast
time τ = t / e1.  Scalars may be floats or ``ExReal``.
"""

from __future__ import annotations

from .poly import PolyQ, evaluate


def fast_rhs(Q: PolyQ, e1, v):
    """(ẋ, ẏ, ż) = (e1 Q(x - e1 z), z, -y + Q(x - e1 z))."""
    x, y, z = v
    q = evaluate(Q, x - e1 * z)
    return (e1 * q, z, -y + q)


def third_order_rhs(Q: PolyQ, e1, v):
    """(f, f', f'')' in slow time t for e1² f''' + f' = Q(f)."""
    f, g, h = v
    return (g, h, (evaluate(Q, f) - g) / (e1 * e1))


def from_third_order(e1, v):
    """(f, f', f'') ↦ (x₂, y₂, z₂) = (f + e1² f'', f', e1 f'')."""
    f, g, h = v
    return (f + e1 * e1 * h, g, e1 * h)


def nft(Q: PolyQ, e1, v):
    """Normal-form coordinates (x̃₂, ỹ₂, z̃₂)."""
    x, y, z = v
    q = evaluate(Q, x)
    d = evaluate(Q, x, 1)
    return (x + e1 * e1 * d * y, y - q + 0.5 * e1 * d * z, z - e1 * d * q)


def nft_jacobian(Q: PolyQ, e1, v):
    x, y, z = v
    q = evaluate(Q, x)
    d = evaluate(Q, x, 1)
    dd = evaluate(Q, x, 2)
    zero = x * 0
    one = zero + 1
    return (
        (one + e1 * e1 * dd * y, e1 * e1 * d, zero),
        (-d + 0.5 * e1 * dd * z, one, 0.5 * e1 * d),
        (-e1 * (dd * q + d * d), zero, one),
    )


def nft_inverse(Q: PolyQ, e1, vt, tol: float = 0.0, maxit: int = 200):
    """Invert :func:`nft` by fixed-point iteration on x₂.

    Given x₂, the other two coordinates follow explicitly; the map
    x₂ ↦ x̃₂ - e1² Q'(x₂) y₂(x₂) contracts for small e1.
    """
    xt, yt, zt = vt
    x = xt
    for _ in range(maxit):
        q = evaluate(Q, x)
        d = evaluate(Q, x, 1)
        z = zt + e1 * d * q
        y = yt + q - 0.5 * e1 * d * z
        x_new = xt - e1 * e1 * d * y
        step = abs(float(x_new - x))
        x = x_new
        if step <= tol or step == 0.0:
            break
    q = evaluate(Q, x)
    d = evaluate(Q, x, 1)
    z = zt + e1 * d * q
    y = yt + q - 0.5 * e1 * d * z
    return (x, y, z)


def tilde_field(Q: PolyQ, e1, vt, tol: float = 0.0):
    """Vector field in normal-form coordinates, by the chain rule DT·X∘T⁻¹."""
    v = nft_inverse(Q, e1, vt, tol)
    J = nft_jacobian(Q, e1, v)
    X = fast_rhs(Q, e1, v)
    return tuple(J[i][0] * X[0] + J[i][1] * X[1] + J[i][2] * X[2] for i in range(3))
