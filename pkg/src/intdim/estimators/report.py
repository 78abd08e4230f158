"""Result and parameter records shared by all estimators."""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .._validation import check_fraction, check_positive_int
from ..exceptions import ConfigError, EstimatorError

AGGREGATIONS = ("mackay", "levina")


@dataclass(frozen=True)
class MleParams:
    """Parameters of the nearest-neighbor MLE.

    ``unbiased`` normalizes each local log-ratio sum by ``k - 2`` instead of
    ``k - 1``, the small-sample correction of the original MLE derivation.
    """

    k: int = 20
    anchor_fraction: float = 1.0
    seed: int = 0
    aggregation: str = "mackay"
    unbiased: bool = False

    def __post_init__(self):
        check_positive_int(self.k, "k", minimum=3 if self.unbiased else 2)
        check_fraction(self.anchor_fraction, "anchor_fraction")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "anchor_fraction", float(self.anchor_fraction))


@dataclass
class EstimateReport:
    """Outcome of one estimator run.

    ``estimate`` is the mean of ``per_replicate``; ``stderr`` is their sample
    standard deviation over the square root of their count (0 for one value).
    """

    estimator: str
    params: dict
    estimate: float
    per_replicate: list
    stderr: float
    n_used: int
    N: int
    dedup_removed: int = 0
    seed: int = 0
    runtime_ms: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.per_replicate = [float(v) for v in self.per_replicate]
        if not self.per_replicate:
            raise EstimatorError("a report needs at least one replicate value")
        if not (math.isfinite(self.estimate) and self.estimate > 0):
            raise EstimatorError(f"{self.estimator}: estimate {self.estimate} is not positive and finite")
        if not self.stderr >= 0:
            raise EstimatorError(f"{self.estimator}: negative standard error")

    @classmethod
    def from_replicates(cls, estimator, params, values, **kw):
        values = np.asarray(values, dtype=float)
        return cls(estimator, dict(params), float(values.mean()), list(values), standard_error(values), **kw)

    def to_dict(self):
        return _jsonable(asdict(self))


def standard_error(values):
    """Sample standard deviation over sqrt(R); 0 for a single value."""
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(len(values)))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj
