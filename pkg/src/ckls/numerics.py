"""Small numerically-stable kernels shared across modules."""

from __future__ import annotations

import math

__all__ = ["stable_phi", "affine_exp_convolution"]


def stable_phi(c: float, t: float) -> float:
    """integral_0^t e^(c s) ds = (e^(c t) - 1) / c, stable through c = 0.

    Series switchover at |c t| < 1e-8, where the ratio form would lose all
    digits (or divide by zero at c = 0 exactly).
    """
    ct = c * t
    if abs(ct) < 1e-8:
        return t * (1.0 + 0.5 * ct)
    return math.expm1(ct) / c


def affine_exp_convolution(alpha: float, beta: float, c: float, t: float) -> float:
    """integral_0^t (alpha + beta s) e^(c (t - s)) ds in closed form.

    Equals alpha (e^(ct)-1)/c + beta (e^(ct) - c t - 1)/c^2, with the
    c -> 0 limit alpha t + beta t^2/2 handled by series.
    """
    ct = c * t
    if abs(ct) < 1e-6:
        quad = 0.5 * t * t * (1.0 + ct / 3.0 + ct * ct / 12.0)
        return alpha * stable_phi(c, t) + beta * quad
    return alpha * stable_phi(c, t) + beta * (math.expm1(ct) - ct) / (c * c)
