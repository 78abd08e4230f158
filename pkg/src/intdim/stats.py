"""Replicated estimates, standard errors and convergence curves."""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_int
from .dataset import PointSet, deduplicate, subsample
from .estimators.api import _as_spec, estimate
from .estimators.report import EstimateReport, standard_error
from .exceptions import ConfigError


def replicate_estimate(ps, spec, R, seed, *, subsample_size=None, dedup=True, n_jobs=None, cache_dir=None):
    """Run ``spec`` ``R`` times with seeds ``seed + i`` and summarize.

    Each replicate uses its own seed for anchors, bootstraps and sample caps.
    With ``subsample_size`` every replicate first draws that many rows without
    replacement (seeded by ``(seed, i)``). Reported stderr is the sample
    standard deviation over sqrt(R), 0 when R is 1.
    """
    R = check_positive_int(R, "R")
    spec = _as_spec(spec)
    if not isinstance(ps, PointSet):
        ps = PointSet(ps)
    start = time.perf_counter()
    removed = 0
    if dedup:
        ps, removed = deduplicate(ps)
    reports = []
    for i in range(R):
        data = ps if subsample_size is None else subsample(ps, subsample_size, (seed, i))
        reports.append(estimate(data, spec, seed=seed + i, dedup=False, n_jobs=n_jobs, cache_dir=cache_dir))
    values = [r.estimate for r in reports]
    return EstimateReport(
        spec.name,
        dict(spec.params),
        float(np.mean(values)),
        values,
        standard_error(values),
        n_used=reports[0].n_used,
        N=ps.n_features,
        dedup_removed=removed,
        seed=seed,
        runtime_ms=(time.perf_counter() - start) * 1e3,
        extra={"replicates": R, "subsample_size": subsample_size},
    )


@dataclass
class ConvergenceCurve:
    sample_sizes: list
    mean_estimates: list
    stderrs: list
    replicates: int
    spec: dict
    per_replicate: list = field(default_factory=list)

    def __post_init__(self):
        if not len(self.sample_sizes) == len(self.mean_estimates) == len(self.stderrs):
            raise ConfigError("convergence curve vectors must have equal length")

    def rows(self):
        return [
            {"m": int(m), "mean": float(mu), "stderr": float(se), "R": self.replicates}
            for m, mu, se in zip(self.sample_sizes, self.mean_estimates, self.stderrs)
        ]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["m", "mean", "stderr", "R"], lineterminator="\n")
            writer.writeheader()
            for row in self.rows():
                writer.writerow({**row, "mean": repr(row["mean"]), "stderr": repr(row["stderr"])})


def _min_size(spec):
    p = spec.params
    if spec.name == "mle":
        return p["k"] + 1
    if spec.name == "twonn":
        return 3
    if spec.name == "geomle":
        return p["k2"] + 2
    return p["k"] + 1


def convergence_curve(ps, spec, sample_sizes, R, seed, *, dedup=True, n_jobs=None):
    """Mean and stderr of ``R`` estimates on fresh subsamples at each size.

    Subsamples are drawn independently for every size and replicate, seeded by
    ``(seed, size index, replicate)``; they are not nested.
    """
    spec = _as_spec(spec)
    R = check_positive_int(R, "R")
    sizes = [int(m) for m in sample_sizes]
    if not sizes:
        raise ConfigError("sample_sizes is empty")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError("sample_sizes must be strictly increasing")
    if not isinstance(ps, PointSet):
        ps = PointSet(ps)
    if dedup:
        ps, _ = deduplicate(ps)
    if sizes[-1] > ps.n_samples:
        raise ConfigError(f"largest sample size {sizes[-1]} exceeds the {ps.n_samples} available points")
    if sizes[0] < _min_size(spec):
        raise ConfigError(f"sample size {sizes[0]} is too small for {spec.name} with {spec.params}")
    means, errs, per = [], [], []
    for j, m in enumerate(sizes):
        values = []
        for i in range(R):
            sub = subsample(ps, m, (seed, j, i))
            values.append(estimate(sub, spec, seed=seed + i, dedup=False, n_jobs=n_jobs).estimate)
        means.append(float(np.mean(values)))
        errs.append(standard_error(values))
        per.append(values)
    return ConvergenceCurve(sizes, means, errs, R, {"name": spec.name, **spec.params}, per)
