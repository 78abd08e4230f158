"""Nearest-neighbor maximum-likelihood estimators (local, global, anchored)."""

import time
import warnings
from typing import NamedTuple

import numpy as np

from .. import knn as knn_mod
from ..dataset import PointSet
from ..exceptions import EstimatorError
from .report import AGGREGATIONS, EstimateReport, MleParams

MIN_ANCHORS = 32


class LocalEstimates(NamedTuple):
    values: np.ndarray
    tied: np.ndarray  # rows whose k distances are all equal (value is +inf)


def _distances(nt, k):
    D = getattr(nt, "distances", nt)
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[1] < k:
        raise EstimatorError(f"need at least k={k} neighbor distances per anchor, got shape {D.shape}")
    D = D[:, :k]
    if not np.all(D > 0):
        raise EstimatorError("neighbor distances must be positive (duplicate rows?)")
    return D


def log_ratio_sums(nt, k):
    """Per anchor, the sum over j < k of log(T_k / T_j)."""
    if k < 2:
        raise EstimatorError(f"k must be >= 2, got {k}")
    D = _distances(nt, k)
    return np.log(D[:, k - 1 : k] / D[:, : k - 1]).sum(axis=1)


def _norm(k, unbiased):
    norm = k - 2 if unbiased else k - 1
    if norm < 1:
        raise EstimatorError(f"the unbiased normalization needs k >= 3, got k={k}")
    return norm


def mle_local(nt, k, *, unbiased=False):
    """Local MLE at every anchor; +inf (flagged in ``tied``) when all k distances tie."""
    S = log_ratio_sums(nt, k)
    tied = S == 0
    with np.errstate(divide="ignore"):
        values = _norm(k, unbiased) / S
    return LocalEstimates(values, tied)


def _aggregate(nt, k, aggregation, unbiased):
    if aggregation not in AGGREGATIONS:
        raise EstimatorError(f"aggregation must be one of {AGGREGATIONS}, got {aggregation!r}")
    if aggregation == "mackay":
        S = log_ratio_sums(nt, k)
        total = S.sum()
        if total == 0:
            raise EstimatorError("all local estimates are infinite (every neighborhood is tied)")
        return len(S) * _norm(k, unbiased) / total, int((S == 0).sum())
    local = mle_local(nt, k, unbiased=unbiased)
    finite = local.values[~local.tied]
    n_inf = int(local.tied.sum())
    if finite.size == 0:
        raise EstimatorError("all local estimates are infinite (every neighborhood is tied)")
    if n_inf:
        warnings.warn(f"{n_inf} infinite local estimates excluded from the levina mean", RuntimeWarning)
    return float(finite.mean()), n_inf


def mle_global(nt, k, aggregation="mackay", *, unbiased=False):
    """Global MLE over all anchors of ``nt``.

    ``mackay`` inverts the mean of the inverse local estimates (a harmonic mean);
    ``levina`` averages the finite local estimates.
    """
    return float(_aggregate(nt, k, aggregation, unbiased)[0])


def draw_anchors(n, anchor_fraction, seed):
    """Sorted anchor rows: all of them at fraction 1, else floor(fraction * n) drawn without replacement."""
    if anchor_fraction >= 1:
        return np.arange(n, dtype=np.int64)
    m = int(np.floor(anchor_fraction * n))
    if m < MIN_ANCHORS:
        raise EstimatorError(
            f"anchor fraction {anchor_fraction} of {n} points gives {m} anchors; at least {MIN_ANCHORS} needed"
        )
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=m, replace=False)).astype(np.int64)


def neighbor_table(ps, k, anchors=None, *, n_jobs=None, cache_dir=None):
    if cache_dir is not None:
        return knn_mod.cached_knn(ps, k, anchors, cache_dir=cache_dir, n_jobs=n_jobs)
    return knn_mod.knn(ps, k, anchors, n_jobs=n_jobs)


def mle_anchor(ps, params=None, *, n_jobs=None, cache_dir=None, table=None, **kw):
    """Global MLE evaluated on a random fraction of anchors, neighbors searched over all of ``ps``.

    ``params`` is an :class:`MleParams` (or its fields as keywords). A
    precomputed ``table`` over the same anchors with at least ``k`` columns
    may be passed to skip the neighbor search.
    """
    params = params or MleParams(**kw)
    if not isinstance(ps, PointSet):
        ps = PointSet(ps)
    start = time.perf_counter()
    anchors = draw_anchors(ps.n_samples, params.anchor_fraction, params.seed)
    if table is None:
        table = neighbor_table(ps, params.k, anchors, n_jobs=n_jobs, cache_dir=cache_dir)
    elif not np.array_equal(table.anchor_indices, anchors):
        raise EstimatorError("precomputed neighbor table was built for different anchors")
    value, n_inf = _aggregate(table, params.k, params.aggregation, params.unbiased)
    return EstimateReport(
        "mle",
        {
            "k": params.k,
            "aggregation": params.aggregation,
            "anchor_fraction": params.anchor_fraction,
            "unbiased": params.unbiased,
        },
        float(value),
        [float(value)],
        0.0,
        n_used=ps.n_samples,
        N=ps.n_features,
        seed=params.seed,
        runtime_ms=(time.perf_counter() - start) * 1e3,
        extra={"n_anchors": len(anchors), "n_infinite_local": n_inf},
    )
