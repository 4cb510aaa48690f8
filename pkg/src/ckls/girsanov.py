"""Drift adjustment, path weights and measure-consistency estimators.

The change of measure reweights base-measure paths by

    R_t = exp( sum_k q(r_k) dW_k - 1/2 sum_k q(r_k)^2 dt )

with the drift adjustment q evaluated by the left-point (Ito) rule,
matching the Euler scheme's filtration alignment.  Weights are
accumulated in log space and exponentiated once: q(r)^2 can be large near
small rates for gamma < 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .engine import (
    NoiseMatrix,
    Path,
    TimeGrid,
    ckls_diffusion,
    ckls_drift,
    map_noise_blocks,
    POSITIVITY_FLOOR,
)
from .errors import DegenerateTransform, DegenerateWeights, DomainError, InputError
from .params import CklsParams

__all__ = [
    "WeightedPath",
    "WeightedEstimate",
    "WeightedSample",
    "NovikovEstimate",
    "drift_adjustment",
    "accumulate_weight",
    "weighted_expectation",
    "weighted_expectation_arrays",
    "novikov_diagnostic",
    "simulate_weighted",
]


@dataclass(frozen=True)
class WeightedPath:
    """A base-measure path with its accumulated log weight at t_end."""

    path: Path
    log_weight: float
    q_integral_sq: float


@dataclass(frozen=True)
class WeightedEstimate:
    estimate: float          # self-normalized: sum(w phi) / sum(w)
    std_error: float
    raw_estimate: float      # unnormalized: mean(w phi)
    raw_std_error: float
    ess: float               # (sum w)^2 / sum w^2
    n_paths: int

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "std_error": self.std_error,
            "raw_estimate": self.raw_estimate,
            "raw_std_error": self.raw_std_error,
            "ess": self.ess,
            "n_paths": self.n_paths,
        }


@dataclass(frozen=True)
class NovikovEstimate:
    estimate: float
    std_error: float


def weighted_report(est: "WeightedEstimate", seed: int, params: CklsParams) -> dict:
    """Machine-comparable record of a weighted estimate for CI diffing."""
    return {
        "estimate": est.estimate,
        "std_error": est.std_error,
        "ess": est.ess,
        "n_paths": est.n_paths,
        "seed": int(seed),
        "params": params.to_dict(),
    }


def drift_adjustment(p: CklsParams, x):
    """q(x) = (a/sigma x^(-gamma) - gamma sigma/2 x^(gamma-1)) sign(gamma-1)."""
    if p.gamma == 1.0:
        raise DegenerateTransform("drift adjustment requires gamma != 1")
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0):
        raise DomainError(f"x must be positive, got {x}")
    sgn = 1.0 if p.gamma > 1.0 else -1.0
    out = (
        p.a / p.sigma * arr ** (-p.gamma)
        - 0.5 * p.gamma * p.sigma * arr ** (p.gamma - 1.0)
    ) * sgn
    return float(out) if np.ndim(x) == 0 else out


def accumulate_weight(p: CklsParams, path: Path, noise_row: np.ndarray) -> WeightedPath:
    """Left-point accumulation of the log weight along one path.

    log R = sum q(r_k) dW_k - 1/2 sum q(r_k)^2 dt over steps k, with r_k
    the state *before* each step; the path must have been simulated with
    exactly this noise row.
    """
    dW = np.asarray(noise_row, dtype=float)
    if dW.shape != (len(path.values) - 1,):
        raise InputError(
            f"noise row length {dW.shape} does not match path with "
            f"{len(path.values)} values"
        )
    dt = path.grid.dt
    q = drift_adjustment(p, path.values[:-1])
    q_int = float(np.sum(q * q) * dt)
    log_w = float(np.sum(q * dW) - 0.5 * q_int)
    return WeightedPath(path=path, log_weight=log_w, q_integral_sq=q_int)


def weighted_expectation_arrays(log_weights: np.ndarray, phi: np.ndarray) -> WeightedEstimate:
    log_weights = np.asarray(log_weights, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if log_weights.size == 0:
        raise InputError("empty input")
    w = np.exp(log_weights)
    w_sum = w.sum()
    if w_sum == 0.0:
        raise DegenerateWeights("all weights are zero")
    n = w.size
    est = float(np.sum(w * phi) / w_sum)
    wn = w / w_sum
    se = float(np.sqrt(np.sum(wn * wn * (phi - est) ** 2)))
    raw = w * phi
    raw_est = float(raw.mean())
    raw_se = float(raw.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    ess = float(w_sum**2 / np.sum(w * w))
    return WeightedEstimate(
        estimate=est,
        std_error=se,
        raw_estimate=raw_est,
        raw_std_error=raw_se,
        ess=ess,
        n_paths=int(n),
    )


def weighted_expectation(
    wpaths: list[WeightedPath], functional: Callable[[Path], float]
) -> WeightedEstimate:
    """Self-normalized and raw importance-sampling estimates of a path
    functional, with the effective sample size (sum w)^2 / sum w^2."""
    if not wpaths:
        raise InputError("empty input")
    logw = np.array([wp.log_weight for wp in wpaths])
    phi = np.array([float(functional(wp.path)) for wp in wpaths])
    return weighted_expectation_arrays(logw, phi)


def novikov_diagnostic(p: CklsParams, wpaths: list[WeightedPath]) -> NovikovEstimate:
    """Monte Carlo estimate of E integral_0^t q(r_s)^2 ds with its standard
    error; finiteness/stability across dt refinement is the usable signal."""
    q_int = np.array([wp.q_integral_sq for wp in wpaths])
    n = q_int.size
    se = float(q_int.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    return NovikovEstimate(estimate=float(q_int.mean()), std_error=se)


@dataclass(frozen=True)
class WeightedSample:
    """Fused Euler-plus-weight run: terminal state and log weight per path."""

    terminal_rate: np.ndarray
    log_weight: np.ndarray
    q_integral_sq: np.ndarray
    truncations: int
    seed: int
    n_paths: int

    def weights(self) -> np.ndarray:
        return np.exp(self.log_weight)


def simulate_weighted(
    p: CklsParams,
    grid: TimeGrid,
    noise: NoiseMatrix,
    workers: int = 1,
    block_size: int = 8192,
) -> WeightedSample:
    """Simulate the base model and accumulate weights in one streaming pass.

    Weight accumulation is per-path and parallelizes with the simulation;
    blocks are stitched by path index, so statistics do not depend on the
    worker count.
    """
    drift = ckls_drift(p)
    diffusion = ckls_diffusion(p)
    dt = grid.dt

    def run_block(lo: int, hi: int, dW: np.ndarray) -> dict:
        n = hi - lo
        r = np.full(n, p.r0)
        lw = np.zeros(n)
        q_int = np.zeros(n)
        trunc = 0
        for k in range(grid.n_steps):
            q = drift_adjustment(p, r)
            col = dW[:, k]
            q_sq_dt = q * q * dt
            lw += q * col - 0.5 * q_sq_dt
            q_int += q_sq_dt
            r = r + drift(r) * dt + diffusion(r) * col
            hit = r < POSITIVITY_FLOOR
            if hit.any():
                trunc += int(hit.sum())
                r = np.where(hit, POSITIVITY_FLOOR, r)
        return {"rate": r, "log_weight": lw, "q_integral_sq": q_int, "trunc": trunc}

    blocks = map_noise_blocks(noise, run_block, block_size=block_size, workers=workers)
    return WeightedSample(
        terminal_rate=np.concatenate([b["rate"] for b in blocks]),
        log_weight=np.concatenate([b["log_weight"] for b in blocks]),
        q_integral_sq=np.concatenate([b["q_integral_sq"] for b in blocks]),
        truncations=sum(b["trunc"] for b in blocks),
        seed=noise.seed,
        n_paths=noise.n_paths,
    )
