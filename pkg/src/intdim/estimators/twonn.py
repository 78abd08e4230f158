"""Two-nearest-neighbor estimator."""

import math

import numpy as np

from .._validation import check_fraction
from ..exceptions import EstimatorError
from .mle import _distances


def twonn(nt, discard_fraction=0.1):
    """ID from the ratios mu = T_2 / T_1 under the Pareto law ``P(mu > x) = x^-d``.

    The largest ``floor(discard_fraction * n)`` ratios are treated as
    right-censored at the largest kept ratio, which gives the closed-form MLE

        d = n_kept / (sum of kept log mu + n_discarded * log mu_max_kept).

    Censoring rather than dropping the tail keeps the likelihood exact for the
    remaining sample, so the estimate stays consistent. With no discard this
    is ``n / sum log mu``.
    """
    check_fraction(discard_fraction, "discard_fraction", low_inclusive=True, high_inclusive=False)
    D = _distances(nt, 2)
    logs = np.log(D[:, 1] / D[:, 0])
    n = len(logs)
    n_drop = math.floor(discard_fraction * n)
    total = logs.sum()
    if n_drop:
        tail = np.sort(logs)[n - n_drop - 1 :]
        # replace each discarded log ratio by the largest kept one
        total -= (tail[1:] - tail[0]).sum()
    if total <= 0:
        raise EstimatorError("all nearest-neighbor ratios equal 1; the estimate is infinite")
    return float((n - n_drop) / total)
