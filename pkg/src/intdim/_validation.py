"""Input validation helpers shared by the estimators and transforms."""

import os
import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import ConfigError

THREADS_ENV = "INTDIM_THREADS"


def check_points(X, *, copy=False):
    """Return ``X`` as a finite, 2-D, C-contiguous float64 array."""
    return check_array(
        X,
        dtype=np.float64,
        order="C",
        copy=copy,
        ensure_2d=True,
        ensure_all_finite=True,
        ensure_min_samples=1,
        ensure_min_features=1,
    )


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_fraction(value, name, *, low_inclusive=False, high_inclusive=True):
    value = float(value)
    lo_ok = value >= 0 if low_inclusive else value > 0
    hi_ok = value <= 1 if high_inclusive else value < 1
    if not (lo_ok and hi_ok and np.isfinite(value)):
        lo = "[" if low_inclusive else "("
        hi = "]" if high_inclusive else ")"
        raise ConfigError(f"{name} must lie in {lo}0, 1{hi}, got {value}")
    return value


def resolve_n_jobs(n_jobs=None):
    """Worker count: explicit argument, else $INTDIM_THREADS, else all cores."""
    if n_jobs is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                n_jobs = int(env)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            n_jobs = os.cpu_count() or 1
    if n_jobs < 1:
        raise ConfigError(f"n_jobs must be >= 1, got {n_jobs}")
    return int(n_jobs)
