"""The power transform linking the model to a square-root diffusion.

For gamma != 1 and a free constant C > 0,

    f(x)  = C^2 / (4 (1-gamma)^2) * x^(2 (1-gamma))
    f'(x) = C^2 / (2 (1-gamma))   * x^(1 - 2 gamma)
    f''(x)= C^2 (1-2 gamma) / (2 (1-gamma)) * x^(-2 gamma)
    finv(y) = |2 (gamma-1) / C|^(1/(1-gamma)) * y^(1/(2 (1-gamma)))

f is strictly monotone on (0, inf): increasing for gamma < 1, decreasing
for gamma > 1, and satisfies x^gamma f'(x) = C sqrt(f(x)) sign(1-gamma).
Mapping the rate through f yields a square-root diffusion with constant
drift sigma^2 C^2 / 4, linear drift 2 b (1-gamma) and volatility sigma C.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTransform, DomainError, RegimeError
from .params import CklsParams, classify_regime

__all__ = [
    "Transform",
    "CirParams",
    "default_c",
    "make_transform",
    "transform_eval",
    "transform_inverse",
    "derive_cir",
]


def _require_positive(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0):
        raise DomainError(f"{name} must be positive, got {x}")
    return arr


def _maybe_scalar(arr: np.ndarray, like) -> "float | np.ndarray":
    if np.isscalar(like) or (isinstance(like, np.ndarray) and like.ndim == 0):
        return float(arr)
    return arr


@dataclass(frozen=True)
class Transform:
    """Frozen power map: the constant C > 0 and the exponent gamma != 1."""

    c: float
    gamma: float

    def __call__(self, x):
        return self.f(x)

    def f(self, x):
        arr = _require_positive(x)
        g = self.gamma
        out = self.c**2 / (4.0 * (1.0 - g) ** 2) * arr ** (2.0 * (1.0 - g))
        return _maybe_scalar(out, x)

    def fprime(self, x):
        arr = _require_positive(x)
        g = self.gamma
        out = self.c**2 / (2.0 * (1.0 - g)) * arr ** (1.0 - 2.0 * g)
        return _maybe_scalar(out, x)

    def fsecond(self, x):
        arr = _require_positive(x)
        g = self.gamma
        out = self.c**2 * (1.0 - 2.0 * g) / (2.0 * (1.0 - g)) * arr ** (-2.0 * g)
        return _maybe_scalar(out, x)

    def inverse(self, y):
        arr = _require_positive(y, "y")
        g = self.gamma
        k = abs(2.0 * (g - 1.0) / self.c) ** (1.0 / (1.0 - g))
        out = k * arr ** (1.0 / (2.0 * (1.0 - g)))
        return _maybe_scalar(out, y)


@dataclass(frozen=True)
class CirParams:
    """Coefficients of the image square-root diffusion.

    dY = (drift_const + drift_lin * Y) dt + vol * sqrt(Y) dW,  Y(0) = y0,

    with drift_const = vol^2 / 4 exactly (one degree of freedom in the
    transition law; see the distribution module).
    """

    drift_const: float
    drift_lin: float
    vol: float
    y0: float

    def __post_init__(self) -> None:
        if not self.drift_const > 0:
            raise ValueError(f"drift_const must be positive, got {self.drift_const}")
        if not self.vol > 0:
            raise ValueError(f"vol must be positive, got {self.vol}")
        if not self.y0 > 0:
            raise ValueError(f"y0 must be positive, got {self.y0}")


def default_c(gamma: float) -> float:
    """Default constant 2|1-gamma|, which normalizes f to the pure power
    x^(2(1-gamma)).  The explicit rate solution does not depend on C, so
    the choice is free; this one is the simplest."""
    return 2.0 * abs(1.0 - gamma)


def make_transform(p: CklsParams, c: float | None = None) -> Transform:
    """Build the power transform for a parameter set.

    c defaults to 2|1-gamma|.  gamma = 1 has no power transform and is
    rejected with DegenerateTransform.
    """
    if p.gamma == 1.0:
        raise DegenerateTransform("gamma = 1: the power transform is undefined")
    if c is None:
        c = default_c(p.gamma)
    if not c > 0:
        raise ValueError(f"C must be positive, got {c}")
    return Transform(c=float(c), gamma=p.gamma)


def transform_eval(t: Transform, x):
    """Evaluate (f, f', f'') at x > 0.  Returns a dict with those keys."""
    return {"f": t.f(x), "fprime": t.fprime(x), "fsecond": t.fsecond(x)}


def transform_inverse(t: Transform, y):
    """Evaluate the inverse map at y > 0, so that f(result) = y."""
    return t.inverse(y)


def derive_cir(p: CklsParams, t: Transform) -> CirParams:
    """Coefficients of the transformed diffusion for a transformable regime.

    Requires a change-of-measure-valid parameter set; otherwise raises
    RegimeError naming the violated inequality.
    """
    regime = classify_regime(p)
    if not regime.girsanov_valid:
        raise RegimeError(_violated_inequality(p))
    return CirParams(
        drift_const=p.sigma**2 * t.c**2 / 4.0,
        drift_lin=2.0 * p.b * (1.0 - p.gamma),
        vol=p.sigma * t.c,
        y0=t.f(p.r0),
    )


def _violated_inequality(p: CklsParams) -> str:
    if p.gamma == 1.0:
        return "gamma = 1 is excluded (need gamma > 1 or gamma in (1/2, 1))"
    if p.gamma <= 0.5:
        return f"gamma = {p.gamma} <= 1/2 (need gamma > 1 or gamma in (1/2, 1))"
    if p.gamma < 1.0:
        parts = []
        if p.gamma / p.sigma < 1.0:
            parts.append(f"gamma/sigma = {p.gamma / p.sigma:g} < 1")
        if p.b <= 0.0:
            parts.append(f"b = {p.b:g} <= 0")
        return "low-gamma branch needs gamma/sigma >= 1 and b > 0: " + ", ".join(parts)
    return "no branch matches"
