"""Evaluation quantities for generated coefficient vectors and channels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dictionary import AngleGrid
from .errors import DegenerateInputError, InvalidArgumentError

SPREAD_HIST_BINS = 64
SPREAD_HIST_RANGE = (0.0, math.pi / 2)


@dataclass
class AngularStats:
    """Batch-level angular summary: normalized power profile over the grid
    and per-sample angular spreads. Zero-norm samples are excluded and
    counted."""

    profile: np.ndarray
    spreads: np.ndarray
    n_skipped: int


def power_angular_profile(vectors: np.ndarray) -> tuple[np.ndarray, int]:
    """Mean normalized per-gridpoint power, and the skipped-sample count.

    Each sample contributes |s_q|^2 / ||s||^2; samples with zero norm are
    skipped (the ratio is undefined for them).
    """
    vectors = np.asarray(vectors)
    if vectors.ndim != 2 or len(vectors) == 0:
        raise InvalidArgumentError("vectors must be a nonempty (n, S) array")
    power = np.abs(vectors) ** 2
    norms = power.sum(axis=1)
    keep = norms > 0
    n_skipped = int(np.sum(~keep))
    if not np.any(keep):
        raise DegenerateInputError("all samples have zero norm")
    profile = np.mean(power[keep] / norms[keep, None], axis=0)
    return profile, n_skipped


def angular_spread(s: np.ndarray, grid: AngleGrid) -> float:
    """Power-weighted standard deviation of the grid angles of one vector."""
    s = np.asarray(s)
    power = np.abs(s) ** 2
    total = power.sum()
    if total == 0:
        raise DegenerateInputError("angular spread is undefined for a zero vector")
    angles = grid.points
    if len(angles) != len(s):
        raise InvalidArgumentError("vector length must match the grid size")
    mean = np.sum(angles * power) / total
    return float(math.sqrt(np.sum((angles - mean) ** 2 * power) / total))


def batch_angular_spreads(vectors: np.ndarray, grid: AngleGrid) -> tuple[np.ndarray, int]:
    """Angular spread per sample; zero-norm samples are skipped and counted."""
    vectors = np.asarray(vectors)
    power = np.abs(vectors) ** 2
    totals = power.sum(axis=1)
    keep = totals > 0
    angles = grid.points
    means = (power[keep] @ angles) / totals[keep]
    deviations = angles[None, :] - means[:, None]
    spreads = np.sqrt(np.sum(deviations**2 * power[keep], axis=1) / totals[keep])
    return spreads, int(np.sum(~keep))


def angular_stats(vectors: np.ndarray, grid: AngleGrid) -> AngularStats:
    profile, skipped = power_angular_profile(vectors)
    spreads, _ = batch_angular_spreads(vectors, grid)
    return AngularStats(profile=profile, spreads=spreads, n_skipped=skipped)


def nmse(estimates: np.ndarray, truths: np.ndarray) -> float:
    """Mean over samples of ||estimate - truth||^2 / dimension."""
    estimates = np.asarray(estimates)
    truths = np.asarray(truths)
    if estimates.shape != truths.shape or estimates.ndim != 2 or len(estimates) == 0:
        raise InvalidArgumentError("estimates and truths must be equal-shape (n, N) arrays")
    err = np.sum(np.abs(estimates - truths) ** 2, axis=1) / estimates.shape[1]
    return float(np.mean(err))


def cosine_similarity(estimates: np.ndarray, truths: np.ndarray) -> float:
    """Mean absolute normalized inner product; 1 for collinear pairs."""
    estimates = np.asarray(estimates)
    truths = np.asarray(truths)
    if estimates.shape != truths.shape or estimates.ndim != 2 or len(estimates) == 0:
        raise InvalidArgumentError("estimates and truths must be equal-shape (n, N) arrays")
    num = np.abs(np.sum(estimates.conj() * truths, axis=1))
    den = np.linalg.norm(estimates, axis=1) * np.linalg.norm(truths, axis=1)
    if np.any(den == 0):
        raise DegenerateInputError("cosine similarity is undefined for zero vectors")
    return float(np.mean(num / den))


def histogram_w1(
    a,
    b,
    bins: int | np.ndarray = SPREAD_HIST_BINS,
    value_range: tuple[float, float] = SPREAD_HIST_RANGE,
) -> float:
    """1-Wasserstein distance between binned empirical distributions.

    Values are clipped into the bin range so every sample carries mass;
    the distance is zero exactly when the two histograms coincide.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise InvalidArgumentError("both value lists must be nonempty")
    edges = np.asarray(bins, dtype=float) if np.ndim(bins) else np.linspace(*value_range, int(bins) + 1)
    lo, hi = edges[0], edges[-1]
    hist_a, _ = np.histogram(np.clip(a, lo, hi), bins=edges)
    hist_b, _ = np.histogram(np.clip(b, lo, hi), bins=edges)
    p = hist_a / hist_a.sum()
    q = hist_b / hist_b.sum()
    centers = 0.5 * (edges[:-1] + edges[1:])
    gaps = np.diff(centers)
    cdf_diff = np.cumsum(p - q)[:-1]
    return float(np.sum(np.abs(cdf_diff) * gaps))


def profile_support_leakage(profile: np.ndarray, support_mask: np.ndarray) -> float:
    """Total profile mass falling outside the support mask."""
    profile = np.asarray(profile, dtype=float)
    support_mask = np.asarray(support_mask, dtype=bool)
    if profile.shape != support_mask.shape:
        raise InvalidArgumentError("mask length must equal the profile length")
    return float(profile[~support_mask].sum())


def toeplitz_deviation(matrix: np.ndarray) -> float:
    """Largest spread (max minus min) along any diagonal of a square matrix.

    Zero for an exactly Toeplitz matrix; used to quantify how far a
    conditional channel covariance is from its stationary structure.
    """
    matrix = np.asarray(matrix)
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise InvalidArgumentError("matrix must be square")
    worst = 0.0
    for offset in range(-(n - 1), n):
        diag = np.diagonal(matrix, offset=offset)
        spread_re = float(diag.real.max() - diag.real.min())
        spread_im = float(diag.imag.max() - diag.imag.min()) if np.iscomplexobj(matrix) else 0.0
        worst = max(worst, spread_re, spread_im)
    return worst
