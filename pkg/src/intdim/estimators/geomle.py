"""GeoMLE: MLE extrapolated to zero neighborhood radius over bootstrap resamples."""

from typing import NamedTuple

import numpy as np

from .._validation import check_points, check_positive_int
from ..exceptions import ConfigError, EstimatorError
from ..knn import knn


class GeoMleResult(NamedTuple):
    estimate: float
    per_replicate: np.ndarray


def _ridge_intercept(radius, estimate, degree, alpha):
    """Value at radius 0 of a ridge-penalized polynomial fit (intercept unpenalized)."""
    P = np.vander(radius, degree + 1, increasing=True)[:, 1:]
    P_mean = P.mean(axis=0)
    A = P - P_mean
    y_mean = estimate.mean()
    coef = np.linalg.solve(A.T @ A + alpha * np.eye(degree), A.T @ (estimate - y_mean))
    return y_mean - P_mean @ coef


def geomle(X, k1=20, k2=55, M=20, degree=2, seed=0, *, alpha=5e-3, n_jobs=None):
    """Bootstrap GeoMLE.

    For each of ``M`` bootstrap resamples (size n, with replacement) and every
    k in ``[k1, k2]``, the mean local MLE and the mean distance to the k-th
    neighbor are computed over the resample. The mean estimate is regressed on
    the mean radius (divided by its average, so the fit is scale free) with a
    degree-``degree`` polynomial, lightly ridge-penalized to keep the
    extrapolation stable, and the value at radius 0 is that resample's
    estimate. The result is the mean over resamples.

    Neighbors are searched among the distinct drawn points; repeated draws
    enter the averages with their multiplicity.
    """
    X = check_points(X)
    n = X.shape[0]
    check_positive_int(k1, "k1", minimum=2)
    check_positive_int(M, "M", minimum=2)
    check_positive_int(degree, "degree", minimum=1)
    if not k2 > k1:
        raise ConfigError(f"k2 must exceed k1, got k1={k1}, k2={k2}")
    if alpha < 0:
        raise ConfigError(f"alpha must be non-negative, got {alpha}")
    ks = np.arange(k1, k2 + 1)
    rng = np.random.default_rng(seed)
    values = np.empty(M)
    for b in range(M):
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
        rows = np.flatnonzero(counts)
        if len(rows) <= k2:
            raise EstimatorError(f"bootstrap resample has {len(rows)} distinct points; need more than k2={k2}")
        w = counts[rows] / n
        D = knn(X[rows], k2, n_jobs=n_jobs).distances
        logD = np.log(D)
        csum = np.cumsum(logD, axis=1)
        est = np.empty(len(ks))
        rad = np.empty(len(ks))
        for t, k in enumerate(ks):
            # sum_{j<k} log(T_k / T_j) = (k-1) log T_k - sum_{j<k} log T_j
            S = (k - 1) * logD[:, k - 1] - csum[:, k - 2]
            finite = S > 0
            if not finite.any():
                raise EstimatorError(f"every local estimate at k={k} is infinite (tied distances)")
            local = (k - 1) / S[finite]
            est[t] = np.sum(w[finite] * local) / np.sum(w[finite])
            rad[t] = np.sum(w * D[:, k - 1])
        if np.ptp(rad) == 0:
            raise EstimatorError("degenerate regression: all neighborhood radii are equal")
        values[b] = _ridge_intercept(rad / rad.mean(), est, degree, alpha)
    # a negative intercept carries no dimension information; clamp to the smallest positive value
    values = np.maximum(values, np.finfo(float).tiny)
    return GeoMleResult(float(values.mean()), values)
