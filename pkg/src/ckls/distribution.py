"""Non-central chi-square machinery and the exact time-t transition laws.

Under the transformed measure the level Y_t = f(r_t) at a fixed time t
satisfies Y_t / L ~ noncentral-chi-square(df, nonc) where

    L    = (vol^2 / 4) * integral_0^t e^(drift_lin * s) ds   (the
           variance of the Gaussian sqrt(Y_t)),
    nonc = Y_0 e^(drift_lin * t) / L                          (squared
           Gaussian mean over variance),

and the degrees of freedom are forced to 4 drift_const / vol^2 = 1 by the
squared-Gaussian structure ("derived" rule).  The alternative df = C^2
("paper" rule) is kept as a selectable variant so the goodness-of-fit
arbitration can document the discrepancy; the two coincide at C = 1.

The density is evaluated as the Poisson mixture

    pdf(x) = sum_n  e^(-nonc/2) (nonc/2)^n / n!  *  chi2_pdf(x; df + 2n)

with all terms through log-gamma, summation started at the Poisson modal
index floor(nonc/2) and expanded outward until a geometric tail bound
drops below series_tol (head terms underflow for large nonc, so a 0-based
sum would lose the mass).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, RegimeError
from .numerics import stable_phi
from .params import CklsParams, classify_regime
from .transform import CirParams, Transform

__all__ = [
    "TransitionSpec",
    "NoncentralChiSq",
    "transition_spec",
    "noncentral_pdf",
    "noncentral_cdf",
    "noncentral_sample",
    "rate_density",
    "rate_cdf",
]


@dataclass(frozen=True)
class TransitionSpec:
    """(scale, df, nonc) fixing the law of Y_t / scale at one time t."""

    t: float
    scale: float
    df: float
    nonc: float

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not self.df > 0:
            raise ValueError(f"df must be positive, got {self.df}")
        if not self.nonc >= 0:
            raise ValueError(f"nonc must be nonnegative, got {self.nonc}")

    def mean(self) -> float:
        """E[Y_t] = scale * (df + nonc)."""
        return self.scale * (self.df + self.nonc)

    def to_dict(self) -> dict:
        return {"t": self.t, "scale": self.scale, "df": self.df, "nonc": self.nonc}


@dataclass(frozen=True)
class NoncentralChiSq:
    """Noncentral chi-square with df degrees of freedom and noncentrality nonc."""

    df: float
    nonc: float
    series_tol: float = 1e-12

    def __post_init__(self) -> None:
        if not self.df > 0:
            raise ValueError(f"df must be positive, got {self.df}")
        if not self.nonc >= 0:
            raise ValueError(f"nonc must be nonnegative, got {self.nonc}")
        if not self.series_tol > 0:
            raise ValueError(f"series_tol must be positive, got {self.series_tol}")


def transition_spec(
    p: CklsParams,
    cir: CirParams,
    t: float,
    delta_rule: str = "derived",
) -> TransitionSpec:
    """Scale, degrees of freedom and noncentrality of the time-t law.

    The time argument is restored in both exponents (the scale must equal
    the accumulated Gaussian variance, which vanishes at t = 0); the
    drift_lin -> 0 degeneracy is handled by the stable limit
    scale = vol^2 t / 4, nonc = 4 y0 / (vol^2 t).
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    regime = classify_regime(p)
    if not regime.girsanov_valid:
        raise RegimeError("transition law requires a change-of-measure-valid regime")
    scale = cir.vol**2 / 4.0 * stable_phi(cir.drift_lin, t)
    nonc = cir.y0 * math.exp(cir.drift_lin * t) / scale
    if delta_rule == "derived":
        df = 4.0 * cir.drift_const / cir.vol**2
    elif delta_rule == "paper":
        df = (cir.vol / p.sigma) ** 2
    else:
        raise ValueError(f"unknown delta_rule {delta_rule!r}")
    return TransitionSpec(t=t, scale=scale, df=df, nonc=nonc)


def _poisson_log_weight(n: np.ndarray, half_nonc: float) -> np.ndarray:
    return -half_nonc + n * math.log(half_nonc) - special.gammaln(n + 1.0)


def _poisson_window(half_nonc: float, tol: float) -> np.ndarray:
    """Index window around the Poisson mode covering all but < tol mass."""
    if half_nonc == 0.0:
        return np.array([0])
    mode = int(half_nonc)
    # expand until the one-sided geometric tail bounds fall below tol
    lo = mode
    w = math.exp(_poisson_log_weight(np.array([mode]), half_nonc)[0])
    w_lo = w
    while lo > 0:
        ratio = lo / half_nonc  # w_(n-1) / w_n
        if ratio < 1.0 and w_lo * ratio / (1.0 - ratio) < tol:
            break
        lo -= 1
        w_lo *= ratio
    hi = mode
    w_hi = w
    while True:
        ratio = half_nonc / (hi + 1.0)  # w_(n+1) / w_n
        if ratio < 1.0 and w_hi * ratio / (1.0 - ratio) < tol:
            break
        hi += 1
        w_hi *= ratio
    return np.arange(lo, hi + 1)


def _pdf_scalar(d: NoncentralChiSq, x: float) -> float:
    half_df = 0.5 * d.df
    half_nonc = 0.5 * d.nonc
    if half_nonc == 0.0:
        return math.exp(
            (half_df - 1.0) * math.log(x) - 0.5 * x - half_df * math.log(2.0)
            - math.lgamma(half_df)
        )

    def log_term(n: int) -> float:
        return (
            -half_nonc + n * math.log(half_nonc) - math.lgamma(n + 1.0)
            + (half_df + n - 1.0) * math.log(x) - 0.5 * x
            - (half_df + n) * math.log(2.0) - math.lgamma(half_df + n)
        )

    def up_ratio(n: int) -> float:
        return half_nonc * 0.5 * x / ((n + 1.0) * (half_df + n))

    mode = int(half_nonc)
    term = math.exp(log_term(mode))
    total = term
    # upward sweep: ratios decrease in n, so a geometric bound closes the tail
    n, t_up = mode, term
    while True:
        r = up_ratio(n)
        if r < 1.0 and t_up * r / (1.0 - r) <= d.series_tol * total:
            break
        t_up *= r
        n += 1
        total += t_up
    # downward sweep
    n, t_dn = mode, term
    while n > 0:
        r = 1.0 / up_ratio(n - 1)  # term(n-1) / term(n)
        if r < 1.0 and t_dn * r / (1.0 - r) <= d.series_tol * total:
            break
        t_dn *= r
        n -= 1
        total += t_dn
    return total


def noncentral_pdf(d: NoncentralChiSq, x):
    """Density of the noncentral chi-square at x.

    x < 0 gives 0.  At x = 0 the continuous limit is returned for df >= 2
    (e^(-nonc/2)/2 at df = 2, 0 above); for df < 2 the density diverges at
    0+ and x = 0 raises DomainError.
    """
    if np.isscalar(x) or np.ndim(x) == 0:
        xs = float(x)
        if xs < 0.0:
            return 0.0
        if xs == 0.0:
            if d.df < 2.0:
                raise DomainError("density diverges at 0+ for df < 2")
            return 0.5 * math.exp(-0.5 * d.nonc) if d.df == 2.0 else 0.0
        return _pdf_scalar(d, xs)
    arr = np.asarray(x, dtype=float)
    out = np.empty(arr.shape, dtype=float)
    flat = arr.ravel()
    res = out.ravel()
    for i, xi in enumerate(flat):
        res[i] = noncentral_pdf(d, xi)
    return out


def noncentral_cdf(d: NoncentralChiSq, x):
    """Distribution function: the Poisson mixture over regularized lower
    incomplete gamma functions.  Monotone, 0 at x = 0, 1 at infinity."""
    scalar = np.isscalar(x) or np.ndim(x) == 0
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(arr.shape, dtype=float)
    pos = arr > 0.0
    if np.any(pos):
        half_nonc = 0.5 * d.nonc
        ns = _poisson_window(half_nonc, d.series_tol)
        if half_nonc == 0.0:
            logw = np.array([0.0])
        else:
            logw = _poisson_log_weight(ns.astype(float), half_nonc)
        w = np.exp(logw)
        xp = arr[pos]
        acc = np.zeros(xp.shape, dtype=float)
        a = 0.5 * d.df + ns.astype(float)
        for chunk in range(0, xp.size, 65536):
            sl = slice(chunk, chunk + 65536)
            g = special.gammainc(a[:, None], 0.5 * xp[None, sl])
            acc[sl] = w @ g
        out[pos] = np.minimum(acc, 1.0)
    return float(out[0]) if scalar else out


def noncentral_sample(d: NoncentralChiSq, rng: np.random.Generator, size=None):
    """Draw from the noncentral chi-square.

    df >= 1 uses (Z + sqrt(nonc))^2 plus an independent central
    chi-square(df - 1) (omitted when df = 1); df < 1 uses the Poisson
    mixture N ~ Poisson(nonc/2), then chi-square(df + 2N).
    """
    if d.df >= 1.0:
        z = rng.standard_normal(size)
        out = (z + math.sqrt(d.nonc)) ** 2
        if d.df > 1.0:
            out = out + rng.chisquare(d.df - 1.0, size)
        return out
    n = rng.poisson(0.5 * d.nonc, size)
    return rng.chisquare(d.df + 2.0 * n)


def rate_density(p: CklsParams, tr: Transform, spec: TransitionSpec, x):
    """Density of the rate at time t under the transformed measure:
    g(x) = pdf(f(x)/scale) |f'(x)| / scale via change of variables."""
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0):
        raise DomainError(f"x must be positive, got {x}")
    d = NoncentralChiSq(df=spec.df, nonc=spec.nonc)
    y = tr.f(x)
    return noncentral_pdf(d, np.asarray(y) / spec.scale) * np.abs(tr.fprime(x)) / spec.scale


def rate_cdf(p: CklsParams, tr: Transform, spec: TransitionSpec, x):
    """Distribution function of the rate, orientation-corrected for the
    decreasing transform when gamma > 1 (P(r <= x) = P(Y >= f(x)))."""
    scalar = np.isscalar(x) or np.ndim(x) == 0
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(arr.shape, dtype=float)
    pos = arr > 0.0
    if np.any(pos):
        d = NoncentralChiSq(df=spec.df, nonc=spec.nonc)
        inner = noncentral_cdf(d, tr.f(arr[pos]) / spec.scale)
        out[pos] = 1.0 - inner if tr.gamma > 1.0 else inner
    return float(out[0]) if scalar else out
