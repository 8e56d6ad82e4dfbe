"""Statistical verification of the scaling limit on sampled ensembles.

The renewal skeleton, diffusively rescaled and linearly interpolated,
should behave like a Brownian bridge as the span grows.  This module
quantifies that claim on finite ensembles four ways:

* the empirical covariance of the scaled process on a fixed time grid is
  fitted against the bridge kernel sigma^2 * s * (1 - t), yielding a
  variance estimate and a relative misfit;
* a fixed-time marginal is tested for Gaussianity by a one-sample
  Kolmogorov-Smirnov statistic with the asymptotic p-value series;
* the largest single renewal increment is compared against the n^(1/3)
  scale, whose exceedance fraction should vanish as the span grows;
* a full walk is compared against its own skeleton interpolation in the
  scaled metric, which should shrink as the span grows.

Everything here is a pure reduction over immutable arrays; nothing
mutates shared state, so callers may parallelize over ensembles freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .counting import bridge_skeleton
from .lattice import Site
from .sampler import Skeleton, evaluate_process_grid, scale_skeleton

KS_SERIES_TERMS = 100
MIN_KS_SAMPLE = 100


class DegenerateFitError(ValueError):
    """The empirical covariance carries no signal to fit."""


class SkeletonMismatchError(ValueError):
    """The supplied skeleton is not the walk's own regeneration skeleton."""


@dataclass(frozen=True)
class Ensemble:
    """Scaled-process values of one sampling campaign on a fixed grid.

    values[r, g, j] is transverse coordinate j of replicate r evaluated
    at grid time g.  seed and law_digest record where the draws came
    from, so downstream reports stay attributable.
    """

    n: int
    grid: np.ndarray
    values: np.ndarray
    seed: int
    law_digest: str

    @property
    def replicates(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BridgeFit:
    """Least-squares match of an empirical covariance to the bridge kernel."""

    sigma2_hat: float
    rel_rms: float
    residuals: np.ndarray


def require_grid(grid: np.ndarray) -> None:
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("time grid must be a nonempty vector")
    if grid.min() <= 0.0 or grid.max() >= 1.0:
        raise ValueError("grid times must lie strictly inside (0, 1)")
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid times must be strictly increasing")


def default_grid() -> np.ndarray:
    """Nine interior deciles; endpoints are excluded because the bridge
    variance vanishes there."""
    return np.round(np.arange(1, 10) * 0.1, 10)


def build_ensemble(
    skeletons: Sequence[Skeleton],
    grid: np.ndarray,
    *,
    seed: int,
    law_digest: str = "",
) -> Ensemble:
    """Scale every skeleton and evaluate it on the grid."""
    if not skeletons:
        raise ValueError("ensemble needs at least one skeleton")
    grid = np.asarray(grid, dtype=np.float64)
    require_grid(grid)
    spans = {s.n for s in skeletons}
    if len(spans) != 1:
        raise ValueError(f"skeletons mix spans {sorted(spans)}")
    rows = [
        evaluate_process_grid(scale_skeleton(skeleton), grid)
        for skeleton in skeletons
    ]
    return Ensemble(
        n=spans.pop(),
        grid=grid,
        values=np.stack(rows),
        seed=seed,
        law_digest=law_digest,
    )


def empirical_covariance(ensemble: Ensemble) -> np.ndarray:
    """Unbiased sample covariance across replicates, averaged over the
    exchangeable transverse coordinates."""
    reps, _, coords = ensemble.values.shape
    if reps < 2:
        raise ValueError("covariance needs at least two replicates")
    acc = None
    for j in range(coords):
        block = ensemble.values[:, :, j]
        centered = block - block.mean(axis=0)
        cov = centered.T @ centered / (reps - 1)
        acc = cov if acc is None else acc + cov
    return acc / coords


def bridge_kernel(grid: np.ndarray) -> np.ndarray:
    """Covariance pattern min(s, t) * (1 - max(s, t)) on the grid."""
    s = np.minimum.outer(grid, grid)
    t = np.maximum.outer(grid, grid)
    return s * (1.0 - t)


def fit_bridge_covariance(cov: np.ndarray, grid: np.ndarray) -> BridgeFit:
    """Scale the bridge kernel onto an empirical covariance.

    sigma2_hat is the least-squares scalar over the upper triangle
    (diagonal included); rel_rms is the residual norm over the norm of
    the fitted model on the same entries.
    """
    grid = np.asarray(grid, dtype=np.float64)
    require_grid(grid)
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (grid.size, grid.size):
        raise ValueError("covariance shape does not match the grid")
    if not cov.any():
        raise DegenerateFitError("empirical covariance is identically zero")
    kernel = bridge_kernel(grid)
    upper = np.triu_indices(grid.size)
    sigma2 = float(cov[upper] @ kernel[upper]) / float(kernel[upper] @ kernel[upper])
    if sigma2 <= 0.0:
        raise DegenerateFitError(
            f"covariance projects to a nonpositive variance {sigma2:.3e}"
        )
    model = sigma2 * kernel
    residuals = cov - model
    rel_rms = float(
        np.linalg.norm(residuals[upper]) / np.linalg.norm(model[upper])
    )
    return BridgeFit(sigma2_hat=sigma2, rel_rms=rel_rms, residuals=residuals)


def kolmogorov_pvalue(statistic: float, sample_size: int) -> float:
    """Asymptotic Kolmogorov tail 2 * sum (-1)^(j-1) exp(-2 j^2 lambda^2),
    truncated after a fixed number of terms and clamped to [0, 1]."""
    lam = math.sqrt(sample_size) * statistic
    if lam <= 0.0:
        return 1.0
    total = 0.0
    for j in range(1, KS_SERIES_TERMS + 1):
        total += (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam)
    return min(1.0, max(0.0, 2.0 * total))


def _normal_cdf(values: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.vectorize(math.erf)(values / math.sqrt(2.0)))


def ks_marginal(
    ensemble: Ensemble,
    t: float,
    sigma2_hat: float,
    *,
    lattice_resolution: float | None = None,
) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov check of a fixed-time marginal.

    The first transverse coordinate of Y(t), standardized by the fitted
    bridge variance sigma2_hat * t * (1 - t), is compared against the
    standard normal.  Returns (statistic, asymptotic p-value).

    Marginals of a lattice walk are supported on a grid of spacing
    1/sqrt(n), so their empirical CDF climbs in steps that no continuous
    law can follow: against a continuous reference the plain statistic
    has a deterministic floor of about half an atom's mass, however
    well the walk converges in distribution.  Passing the transverse
    lattice spacing (1.0 for the unit lattice) as lattice_resolution
    compares the CDFs at lattice cell boundaries instead, where the
    discretized and continuous references agree; with the resolution
    omitted the statistic is the classic sup over the sample.
    """
    if sigma2_hat <= 0.0:
        raise ValueError(f"variance must be positive, got {sigma2_hat}")
    if not 0.0 < t < 1.0:
        raise ValueError(f"marginal time must be inside (0, 1), got {t}")
    if ensemble.replicates < MIN_KS_SAMPLE:
        raise ValueError(
            f"need at least {MIN_KS_SAMPLE} replicates, "
            f"got {ensemble.replicates}"
        )
    matches = np.flatnonzero(np.isclose(ensemble.grid, t, rtol=0.0, atol=1e-12))
    if matches.size != 1:
        raise ValueError(f"time {t} is not a grid point of the ensemble")
    scale = math.sqrt(sigma2_hat * t * (1.0 - t))
    sample = np.sort(ensemble.values[:, matches[0], 0] / scale)
    reps = sample.size
    if lattice_resolution is None:
        cdf = _normal_cdf(sample)
        steps = np.arange(1, reps + 1) / reps
        statistic = float(
            np.maximum(steps - cdf, cdf - (steps - 1.0 / reps)).max()
        )
        return statistic, kolmogorov_pvalue(statistic, reps)
    if lattice_resolution <= 0.0:
        raise ValueError("lattice resolution must be positive")
    if ensemble.n < 1:
        raise ValueError("lattice-aware comparison needs the ensemble span")
    spacing = lattice_resolution / (math.sqrt(ensemble.n) * scale)
    low = math.floor(sample[0] / spacing) - 1
    high = math.ceil(sample[-1] / spacing) + 1
    boundaries = (np.arange(low, high + 1) + 0.5) * spacing
    empirical = np.searchsorted(sample, boundaries, side="right") / reps
    statistic = float(np.abs(empirical - _normal_cdf(boundaries)).max())
    return statistic, kolmogorov_pvalue(statistic, reps)


def gap_statistic(skeletons: Sequence[Skeleton], n: int) -> float:
    """Fraction of skeletons with a renewal increment longer than n^(1/3).

    Increment length is the Euclidean norm of the full displacement,
    longitudinal part included.
    """
    if not skeletons:
        raise ValueError("no skeletons given")
    if any(s.n != n for s in skeletons):
        raise ValueError("skeleton span disagrees with n")
    threshold = n ** (1.0 / 3.0)
    exceeding = 0
    for skeleton in skeletons:
        largest = max(
            math.sqrt(s.t * s.t + sum(c * c for c in s.y))
            for s in skeleton.increments
        )
        if largest > threshold:
            exceeding += 1
    return exceeding / len(skeletons)


def _distance_to_polyline(points: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to a piecewise-linear curve."""
    if knots.shape[0] == 1:
        return np.linalg.norm(points - knots[0], axis=1)
    starts = knots[:-1]
    spans = knots[1:] - starts
    lengths2 = np.einsum("sd,sd->s", spans, spans)
    lengths2[lengths2 == 0.0] = 1.0
    offsets = points[:, None, :] - starts[None, :, :]
    position = np.clip(
        np.einsum("psd,sd->ps", offsets, spans) / lengths2, 0.0, 1.0
    )
    nearest = starts[None, :, :] + position[:, :, None] * spans[None, :, :]
    return np.linalg.norm(points[:, None, :] - nearest, axis=2).min(axis=1)


def shrinking_statistic(walk: Sequence[Site], skeleton: Skeleton, n: int) -> float:
    """Largest scaled distance from a walk vertex to its skeleton curve.

    The walk and the skeleton interpolation are both mapped to scaled
    coordinates (first component over n, transverse components over
    sqrt(n)); the statistic is the sup over walk vertices of the
    Euclidean distance to the piecewise-linear skeleton graph.
    """
    own = bridge_skeleton(walk)
    if tuple(skeleton.increments) != own or skeleton.n != walk[-1][0]:
        raise SkeletonMismatchError(
            "skeleton does not match the walk's regeneration decomposition"
        )
    if walk[-1][0] != n or any(c != 0 for c in walk[-1][1:]):
        raise ValueError(f"walk must end on the axis at ({n}, 0)")
    scale = np.array([n] + [math.sqrt(n)] * (len(walk[0]) - 1), dtype=np.float64)
    points = np.asarray(walk, dtype=np.float64) / scale
    increments = np.array(
        [(s.t, *s.y) for s in skeleton.increments], dtype=np.float64
    )
    knots = np.vstack((np.zeros(len(walk[0])), np.cumsum(increments, axis=0)))
    knots /= scale
    return float(_distance_to_polyline(points, knots).max())
