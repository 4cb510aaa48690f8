"""Path simulation: discretized schemes under the base measure and exact
draws under the transformed measure.

Everything is reproducible: Gaussian increments come from per-path
substreams keyed by (seed, path index), so changing the path count never
reshuffles earlier paths, and results are bit-identical across runs and
across worker counts (reductions are stitched in path order).  Normals
are generated by numpy's PCG64 ziggurat, fixed for this build.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, RegimeError, SingularSample
from .numerics import stable_phi
from .params import CklsParams, classify_regime
from .transform import CirParams

__all__ = [
    "POSITIVITY_FLOOR",
    "TimeGrid",
    "NoiseMatrix",
    "Path",
    "AuxiliaryResult",
    "ckls_drift",
    "ckls_diffusion",
    "auxiliary_drift",
    "explicit_solution_drift",
    "euler_values",
    "euler_ckls",
    "euler_auxiliary",
    "euler_under_q",
    "exact_sqrt_level",
    "explicit_rate",
    "explicit_rate_on_grid",
    "sample_cir_exact",
    "map_noise_blocks",
]

# Euler paths are clamped here rather than reflected: truncation stays
# visible in the reported counts instead of being hidden by the scheme.
POSITIVITY_FLOOR = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_n = t_end with dt = t_end / n_steps."""

    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not self.n_steps >= 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)


@dataclass(frozen=True)
class NoiseMatrix:
    """Per-path Gaussian increments with variance dt per step.

    Row i is drawn from the substream seeded by (seed, i); rows are
    realized lazily in blocks so large runs never materialize the full
    matrix.
    """

    seed: int
    n_paths: int
    grid: TimeGrid

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not self.n_paths >= 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")

    def increments(self, lo: int = 0, hi: int | None = None) -> np.ndarray:
        """Realize rows lo..hi (exclusive) as an array of shape (hi-lo, n_steps)."""
        hi = self.n_paths if hi is None else hi
        if not 0 <= lo <= hi <= self.n_paths:
            raise ValueError(f"bad row range [{lo}, {hi}) for n_paths={self.n_paths}")
        sqrt_dt = math.sqrt(self.grid.dt)
        out = np.empty((hi - lo, self.grid.n_steps))
        for i in range(lo, hi):
            rng = np.random.default_rng([int(self.seed), i])
            out[i - lo] = rng.standard_normal(self.grid.n_steps)
        out *= sqrt_dt
        return out

    def row(self, i: int) -> np.ndarray:
        return self.increments(i, i + 1)[0]


@dataclass(frozen=True)
class Path:
    """One discretized trajectory; truncations counts floor-clamped steps."""

    grid: TimeGrid
    values: np.ndarray
    truncations: int = 0

    @property
    def truncated(self) -> bool:
        return self.truncations > 0


@dataclass(frozen=True)
class AuxiliaryResult:
    """Auxiliary-SDE run with the positivity diagnostic statistics."""

    paths: list
    variant: str
    min_values: np.ndarray = field(repr=False)
    floor_hits: int = 0

    @property
    def floor_fraction(self) -> float:
        return self.floor_hits / len(self.paths)


def ckls_drift(p: CklsParams) -> Callable[[np.ndarray], np.ndarray]:
    """Base-measure drift a - b x."""
    return lambda x: p.a - p.b * x


def ckls_diffusion(p: CklsParams) -> Callable[[np.ndarray], np.ndarray]:
    """Diffusion sigma x^gamma."""
    return lambda x: p.sigma * x**p.gamma


def auxiliary_drift(p: CklsParams, variant: str = "derived") -> Callable:
    """Drift of the drift-adjusted auxiliary equation.

    gamma > 1:  2a - b x - (gamma sigma^2 / 2) x^(2 gamma - 1)  (both variants).
    gamma < 1:  variant "paper" uses (gamma sigma / 2) x^(2 gamma - 1) - b x
    as printed; variant "derived" uses (gamma sigma^2 / 2) x^(2 gamma - 1) - b x,
    the form obtained by expanding the adjusted drift.
    """
    if p.gamma == 1.0:
        raise DomainError("auxiliary dynamics require gamma != 1")
    if variant not in ("paper", "derived"):
        raise ValueError(f"unknown auxiliary variant {variant!r}")
    g, s, a, b = p.gamma, p.sigma, p.a, p.b
    if g > 1.0:
        return lambda x: 2.0 * a - b * x - 0.5 * g * s**2 * x ** (2.0 * g - 1.0)
    coeff = 0.5 * g * (s if variant == "paper" else s**2)
    return lambda x: coeff * x ** (2.0 * g - 1.0) - b * x


def explicit_solution_drift(p: CklsParams) -> Callable:
    """Drift of the SDE the closed-form rate solution satisfies:
    (gamma sigma^2 / 2) x^(2 gamma - 1) + b x, driven by
    sign(1-gamma) sigma x^gamma against the transformed-measure noise."""
    g, s, b = p.gamma, p.sigma, p.b
    return lambda x: 0.5 * g * s**2 * x ** (2.0 * g - 1.0) + b * x


def _as_increments(noise) -> np.ndarray:
    if isinstance(noise, NoiseMatrix):
        return noise.increments()
    dW = np.asarray(noise, dtype=float)
    if dW.ndim == 1:
        dW = dW[None, :]
    return dW


def euler_values(
    drift: Callable,
    diffusion: Callable,
    r0: float,
    dt: float,
    dW: np.ndarray,
    floor: float = POSITIVITY_FLOOR,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Euler-Maruyama over a block of increment rows.

    Returns (values, truncations) with values of shape
    (n_paths, n_steps + 1) and per-path counts of floor-clamped steps.
    """
    n_paths, n_steps = dW.shape
    values = np.empty((n_paths, n_steps + 1))
    values[:, 0] = r0
    trunc = np.zeros(n_paths, dtype=np.int64)
    r = np.full(n_paths, float(r0))
    for k in range(n_steps):
        r = r + drift(r) * dt + diffusion(r) * dW[:, k]
        hit = r < floor
        if hit.any():
            trunc += hit
            r = np.where(hit, floor, r)
        values[:, k + 1] = r
    return values, trunc


def _wrap_paths(grid: TimeGrid, values: np.ndarray, trunc: np.ndarray) -> list:
    return [Path(grid, values[i], int(trunc[i])) for i in range(values.shape[0])]


def euler_ckls(p: CklsParams, grid: TimeGrid, noise) -> list:
    """Euler-Maruyama for the base model, one Path per noise row.

    r_(k+1) = r_k + (a - b r_k) dt + sigma r_k^gamma dW_k, clamped at the
    positivity floor with the clamp events counted per path.
    """
    dW = _as_increments(noise)
    values, trunc = euler_values(ckls_drift(p), ckls_diffusion(p), p.r0, grid.dt, dW)
    return _wrap_paths(grid, values, trunc)


def euler_auxiliary(
    p: CklsParams, grid: TimeGrid, noise, variant: str = "derived"
) -> AuxiliaryResult:
    """Euler-Maruyama for the auxiliary equation plus positivity statistics."""
    dW = _as_increments(noise)
    values, trunc = euler_values(
        auxiliary_drift(p, variant), ckls_diffusion(p), p.r0, grid.dt, dW
    )
    return AuxiliaryResult(
        paths=_wrap_paths(grid, values, trunc),
        variant=variant,
        min_values=values.min(axis=1),
        floor_hits=int(np.count_nonzero(trunc)),
    )


def euler_under_q(p: CklsParams, grid: TimeGrid, noise) -> np.ndarray:
    """Euler-Maruyama for the transformed-measure dynamics consistent with
    the closed-form solution, sharing the given noise rows.  Returns the
    raw value matrix (n_paths, n_steps + 1)."""
    dW = _as_increments(noise)
    sign = 1.0 if p.gamma < 1.0 else -1.0
    diffusion = lambda x: sign * p.sigma * x**p.gamma  # noqa: E731
    values, _ = euler_values(explicit_solution_drift(p), diffusion, p.r0, grid.dt, dW)
    return values


def _require_transformable(p: CklsParams) -> None:
    if not classify_regime(p).girsanov_valid:
        raise RegimeError("operation requires a change-of-measure-valid regime")


def exact_sqrt_level(cir: CirParams, p: CklsParams, t: float, z):
    """Exact draw of the Gaussian sqrt(Y_t) (a signed real).

    sqrt(Y_t) = sqrt(Y_0) e^(rate t) + (vol/2) sqrt(phi(2 rate, t)) Z with
    rate = drift_lin / 2 and phi the stable exponential integral; the
    rate -> 0 limit is sqrt(Y_0) + (vol/2) sqrt(t) Z.
    """
    _require_transformable(p)
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    mean = math.sqrt(cir.y0) * math.exp(0.5 * cir.drift_lin * t)
    std = 0.5 * cir.vol * math.sqrt(stable_phi(cir.drift_lin, t))
    return mean + std * np.asarray(z, dtype=float)


def explicit_rate(p: CklsParams, t: float, z):
    """Closed-form rate draw at time t under the transformed measure.

    r_t = | r0^(1-gamma) e^(-(gamma-1) b t)
           + sigma |gamma-1| sqrt(phi(2 b (1-gamma), t)) Z |^(1/(1-gamma))

    The result does not depend on the free transform constant.  A base of
    exactly zero (a probability-zero event hit numerically) raises
    SingularSample; callers report and resample.
    """
    _require_transformable(p)
    if p.gamma == 1.0:
        raise DomainError("explicit solution requires gamma != 1")
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    g = p.gamma
    c = p.b * (1.0 - g)
    base = p.r0 ** (1.0 - g) * math.exp(c * t) + p.sigma * abs(g - 1.0) * math.sqrt(
        stable_phi(2.0 * c, t)
    ) * np.asarray(z, dtype=float)
    if np.any(base == 0.0):
        raise SingularSample("explicit solution hit a zero base; resample")
    out = np.abs(base) ** (1.0 / (1.0 - g))
    return float(out) if np.ndim(z) == 0 else out


def explicit_rate_on_grid(p: CklsParams, grid: TimeGrid, noise) -> np.ndarray:
    """Pathwise closed-form solution realized on the grid from increments.

    The Gaussian integral is accumulated by the exponential recursion
    G_(k+1) = e^(c dt) G_k + (phi(c, dt)/dt) dW_k, whose strong coupling
    error is O(dt) -- below the Euler scheme's O(sqrt(dt)), which is what
    the convergence ladder measures.
    """
    _require_transformable(p)
    dW = _as_increments(noise)
    n_paths, n_steps = dW.shape
    g = p.gamma
    c = p.b * (1.0 - g)
    dt = grid.dt
    decay = math.exp(c * dt)
    kappa = stable_phi(c, dt) / dt
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = p.r0
    G = np.zeros(n_paths)
    r0_pow = p.r0 ** (1.0 - g)
    for k in range(n_steps):
        G = decay * G + kappa * dW[:, k]
        base = r0_pow * math.exp(c * dt * (k + 1)) + p.sigma * abs(g - 1.0) * G
        out[:, k + 1] = np.abs(base) ** (1.0 / (1.0 - g))
    return out


def sample_cir_exact(
    cir: CirParams,
    p: CklsParams,
    t: float,
    rng: np.random.Generator,
    size=None,
):
    """Exact draw of the transformed level Y_t = scale * X with X from the
    noncentral chi-square transition law; independent oracle against
    exact_sqrt_level squared."""
    from .distribution import NoncentralChiSq, noncentral_sample, transition_spec

    _require_transformable(p)
    spec = transition_spec(p, cir, t, delta_rule="derived")
    d = NoncentralChiSq(df=spec.df, nonc=spec.nonc)
    return spec.scale * noncentral_sample(d, rng, size)


def map_noise_blocks(
    noise: NoiseMatrix,
    fn: Callable[[int, int, np.ndarray], dict],
    block_size: int = 8192,
    workers: int = 1,
):
    """Apply fn(lo, hi, increments) over row blocks, stitched in block order.

    Blocks may run on a thread pool; the returned list is always in block
    order, so downstream ordered reductions are identical for any worker
    count.
    """
    ranges = [
        (lo, min(lo + block_size, noise.n_paths))
        for lo in range(0, noise.n_paths, block_size)
    ]
    if workers <= 1:
        return [fn(lo, hi, noise.increments(lo, hi)) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(lambda r: fn(r[0], r[1], noise.increments(*r)), r) for r in ranges]
        return [f.result() for f in futures]
