"""Uniform dispatch over the estimators, and scikit-learn style wrappers."""

import time
from dataclasses import dataclass, field

from sklearn.base import BaseEstimator

from ..dataset import PointSet, deduplicate, subsample
from ..exceptions import ConfigError
from .geodesic import geodesic_id
from .geomle import geomle
from .mle import _aggregate, draw_anchors, mle_anchor, neighbor_table
from .report import EstimateReport, MleParams
from .twonn import twonn

ESTIMATORS = ("mle", "twonn", "geomle", "geodesic")

DEFAULTS = {
    "mle": {"k": 20, "aggregation": "mackay", "anchor_fraction": 1.0, "unbiased": False},
    "twonn": {"discard_fraction": 0.1},
    "geomle": {"k1": 20, "k2": 55, "M": 20, "degree": 2, "alpha": 5e-3, "sample_cap": None},
    "geodesic": {"k": 4, "bins": 1000, "sample_cap": 10000, "window": 0.5},
}
_CAP_STREAM = 0xCA9


@dataclass(frozen=True)
class EstimatorSpec:
    """An estimator name plus its parameters; unspecified ones take the defaults."""

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.name!r}; expected one of {ESTIMATORS}")
        unknown = set(self.params) - set(DEFAULTS[self.name])
        if unknown:
            raise ConfigError(f"unknown parameter(s) for {self.name}: {sorted(unknown)}")
        object.__setattr__(self, "params", {**DEFAULTS[self.name], **self.params})

    def with_params(self, **params):
        return EstimatorSpec(self.name, {**self.params, **params})


def _as_spec(spec):
    if isinstance(spec, EstimatorSpec):
        return spec
    if isinstance(spec, str):
        return EstimatorSpec(spec)
    spec = dict(spec)
    return EstimatorSpec(spec.pop("name"), spec)


def _prepare(ps, dedup):
    if not isinstance(ps, PointSet):
        ps = PointSet(ps)
    removed = 0
    if dedup:
        ps, removed = deduplicate(ps)
    return ps, removed


def _cap(ps, cap, seed):
    if cap is not None and ps.n_samples > cap:
        return subsample(ps, int(cap), (seed, _CAP_STREAM))
    return ps


def estimate(ps, spec, *, seed=0, dedup=True, n_jobs=None, cache_dir=None):
    """Run one estimator on ``ps`` and return a filled :class:`EstimateReport`.

    ``spec`` is an :class:`EstimatorSpec`, an estimator name, or a mapping with
    a ``name`` key. Exact duplicate rows are removed first unless ``dedup`` is
    false. ``cache_dir`` enables the on-disk neighbor-table cache for the MLE
    and TwoNN searches.
    """
    spec = _as_spec(spec)
    start = time.perf_counter()
    ps, removed = _prepare(ps, dedup)
    p = spec.params
    extra = {}
    if spec.name == "mle":
        report = mle_anchor(ps, MleParams(seed=seed, **p), n_jobs=n_jobs, cache_dir=cache_dir)
        report.dedup_removed = removed
        report.runtime_ms = (time.perf_counter() - start) * 1e3
        return report
    if spec.name == "twonn":
        table = neighbor_table(ps, 2, n_jobs=n_jobs, cache_dir=cache_dir)
        values = [twonn(table, p["discard_fraction"])]
        n_used = ps.n_samples
    elif spec.name == "geomle":
        used = _cap(ps, p["sample_cap"], seed)
        res = geomle(used.data, p["k1"], p["k2"], p["M"], p["degree"], seed, alpha=p["alpha"], n_jobs=n_jobs)
        values = res.per_replicate
        n_used = used.n_samples
    else:
        used = _cap(ps, p["sample_cap"], seed)
        res = geodesic_id(used.data, p["k"], p["bins"], window=p["window"], n_jobs=n_jobs)
        values = [res.estimate]
        n_used = used.n_samples
        extra = {"r_max": res.r_max, "window_bins": res.window_bins, "component_size": res.n_nodes}
    report = EstimateReport.from_replicates(
        spec.name, p, values, n_used=n_used, N=ps.n_features, dedup_removed=removed, seed=seed, extra=extra
    )
    report.runtime_ms = (time.perf_counter() - start) * 1e3
    return report


def estimate_k_sweep(ps, ks, *, aggregation="mackay", anchor_fraction=1.0, unbiased=False, seed=0,
                     dedup=True, n_jobs=None, cache_dir=None):
    """MLE reports for every k in ``ks`` from a single neighbor search at max(ks)."""
    ks = [int(k) for k in ks]
    if not ks:
        raise ConfigError("k list is empty")
    start = time.perf_counter()
    ps, removed = _prepare(ps, dedup)
    params = [MleParams(k, anchor_fraction, seed, aggregation, unbiased) for k in ks]
    anchors = draw_anchors(ps.n_samples, anchor_fraction, seed)
    table = neighbor_table(ps, max(ks), anchors, n_jobs=n_jobs, cache_dir=cache_dir)
    elapsed = (time.perf_counter() - start) * 1e3
    reports = []
    for prm in params:
        value, n_inf = _aggregate(table, prm.k, aggregation, unbiased)
        reports.append(EstimateReport(
            "mle",
            {"k": prm.k, "aggregation": aggregation, "anchor_fraction": prm.anchor_fraction, "unbiased": unbiased},
            float(value), [float(value)], 0.0,
            n_used=ps.n_samples, N=ps.n_features, dedup_removed=removed, seed=seed, runtime_ms=elapsed,
            extra={"n_anchors": len(anchors), "n_infinite_local": n_inf},
        ))
    return reports


class _DimensionEstimator(BaseEstimator):
    """Shared ``fit`` for the wrappers: sets ``dimension_`` and ``report_``."""

    _name = None

    def _spec_params(self):
        return {key: getattr(self, key) for key in DEFAULTS[self._name]}

    def fit(self, X, y=None):
        spec = EstimatorSpec(self._name, self._spec_params())
        self.report_ = estimate(X, spec, seed=self.seed, dedup=self.dedup, n_jobs=self.n_jobs)
        self.dimension_ = self.report_.estimate
        self.n_features_in_ = self.report_.N
        return self

    def fit_predict(self, X, y=None):
        """Fit and return the estimated dimension."""
        return self.fit(X).dimension_


class MLE(_DimensionEstimator):
    """Nearest-neighbor MLE (MacKay or Levina aggregation), optionally on random anchors."""

    _name = "mle"

    def __init__(self, k=20, aggregation="mackay", anchor_fraction=1.0, unbiased=False, seed=0,
                 dedup=True, n_jobs=None):
        self.k = k
        self.aggregation = aggregation
        self.anchor_fraction = anchor_fraction
        self.unbiased = unbiased
        self.seed = seed
        self.dedup = dedup
        self.n_jobs = n_jobs


class TwoNN(_DimensionEstimator):
    _name = "twonn"

    def __init__(self, discard_fraction=0.1, seed=0, dedup=True, n_jobs=None):
        self.discard_fraction = discard_fraction
        self.seed = seed
        self.dedup = dedup
        self.n_jobs = n_jobs


class GeoMLE(_DimensionEstimator):
    _name = "geomle"

    def __init__(self, k1=20, k2=55, M=20, degree=2, alpha=5e-3, sample_cap=None, seed=0,
                 dedup=True, n_jobs=None):
        self.k1 = k1
        self.k2 = k2
        self.M = M
        self.degree = degree
        self.alpha = alpha
        self.sample_cap = sample_cap
        self.seed = seed
        self.dedup = dedup
        self.n_jobs = n_jobs


class GeodesicID(_DimensionEstimator):
    _name = "geodesic"

    def __init__(self, k=4, bins=1000, sample_cap=10000, window=0.5, seed=0, dedup=True, n_jobs=None):
        self.k = k
        self.bins = bins
        self.sample_cap = sample_cap
        self.window = window
        self.seed = seed
        self.dedup = dedup
        self.n_jobs = n_jobs

