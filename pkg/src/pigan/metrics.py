"""Evaluation quantities: empirical W1, spectra, correlation, relative error,
and overfitting diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist


def w1_empirical(a: np.ndarray, b: np.ndarray) -> float:
    """Exact Wasserstein-1 distance between two uniform point clouds of equal size.

    The optimal coupling of two equal-size uniform clouds is a permutation, so
    this is an assignment problem on the Euclidean cost matrix.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape != b.shape:
        raise ValueError(f"point clouds must have equal shapes, got {a.shape} and {b.shape}")
    if a.shape[0] == 0:
        raise ValueError("empty point cloud")
    cost = cdist(a, b)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum() / a.shape[0])


def w1_sorted_1d(a, b) -> float:
    a = np.sort(np.ravel(a))
    b = np.sort(np.ravel(b))
    if a.shape != b.shape:
        raise ValueError("point clouds must have equal sizes")
    return float(np.abs(a - b).sum() / a.size)


def spectra_from_cov(cov: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of a covariance matrix, round-off negatives set to 0."""
    ev = np.linalg.eigvalsh(cov)[::-1]
    tol = 1e-12 * max(1.0, float(np.trace(cov)))
    if ev.min(initial=0.0) < -max(tol, 1e-8 * abs(float(np.trace(cov)))):
        raise ValueError("covariance matrix is not positive semidefinite")
    return np.where(ev < 0, 0.0, ev)


def spectra(paths: np.ndarray) -> np.ndarray:
    """PCA spectrum of sample paths (N, m): eigenvalues of the unbiased covariance."""
    paths = np.asarray(paths, float)
    if paths.ndim != 2 or paths.shape[0] < 2:
        raise ValueError("need at least 2 paths of shape (N, m)")
    dev = paths - paths.mean(axis=0)
    return spectra_from_cov(dev.T @ dev / (paths.shape[0] - 1))


def correlation_coefficient(f1: np.ndarray, f2: np.ndarray, return_excluded: bool = False):
    """Grid average of |Pearson correlation| between paired paths (N, n).

    Grid points where either process has zero variance are left out; with
    ``return_excluded`` the number of such points is returned as well.
    """
    f1 = np.asarray(f1, float)
    f2 = np.asarray(f2, float)
    if f1.shape != f2.shape or f1.ndim != 2:
        raise ValueError("paired paths must share shape (N, n)")
    d1 = f1 - f1.mean(axis=0)
    d2 = f2 - f2.mean(axis=0)
    cov = (d1 * d2).sum(axis=0)
    v1 = (d1 * d1).sum(axis=0)
    v2 = (d2 * d2).sum(axis=0)
    ok = (v1 > 0) & (v2 > 0)
    excluded = int((~ok).sum())
    if not ok.any():
        raise ValueError("zero variance at every grid point")
    c = float(np.mean(np.abs(cov[ok] / np.sqrt(v1[ok] * v2[ok]))))
    return (c, excluded) if return_excluded else c


def relative_error(estimate, reference) -> float:
    """Discrete L2 relative error ||est - ref|| / ||ref||."""
    est = np.asarray(estimate, float)
    ref = np.asarray(reference, float)
    if est.shape != ref.shape:
        raise ValueError("estimate and reference must share a grid")
    norm = np.linalg.norm(ref)
    if norm == 0:
        raise ValueError("reference has zero norm")
    return float(np.linalg.norm(est - ref) / norm)


@dataclass
class OverfitRow:
    neg_ld_train: float | None
    neg_ld_val: float | None
    w1_gen_train: float
    w1_gen_val: float
    baseline_mean: float
    baseline_std: float


def _subsample(x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    if x.shape[0] < n:
        raise ValueError(f"need {n} rows, have {x.shape[0]}")
    if x.shape[0] == n:
        return x
    return x[rng.choice(x.shape[0], n, replace=False)]


def overfit_report(
    train: np.ndarray,
    validation: np.ndarray,
    generated: np.ndarray,
    real_sampler: Callable[[int, np.random.Generator], np.ndarray],
    rng: np.random.Generator,
    n: int = 1000,
    n_baseline: int = 50,
    disc_loss: Callable[[np.ndarray], float] | None = None,
) -> OverfitRow:
    """W1 of generated snapshots to training and validation data, against the
    baseline spread E[W1] between two independent real samples of size ``n``.

    ``disc_loss(real_rows)`` returns the discriminator loss on a real set; its
    negation is reported for the training and validation data when given.
    """
    if validation.shape[0] < n:
        raise ValueError(f"validation set has {validation.shape[0]} rows, need {n}")
    g = _subsample(generated, n, rng)
    t = _subsample(train, n, rng)
    v = _subsample(validation, n, rng)
    base = np.array([w1_empirical(real_sampler(n, rng), real_sampler(n, rng)) for _ in range(n_baseline)])
    return OverfitRow(
        None if disc_loss is None else -disc_loss(train),
        None if disc_loss is None else -disc_loss(validation),
        w1_empirical(g, t),
        w1_empirical(g, v),
        float(base.mean()),
        float(base.std(ddof=1)),
    )
