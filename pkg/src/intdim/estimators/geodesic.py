"""Estimator fitting kNN-graph geodesic distances to the hypersphere distance law."""

from typing import NamedTuple

import numpy as np

from .._validation import check_points, check_positive_int
from ..exceptions import ConfigError, EstimatorError
from ..knn import build_knn_graph, geodesic_distances, largest_component

D_GRID = np.round(np.arange(1.0, 100.0 + 1e-9, 0.05), 10)


class GeodesicResult(NamedTuple):
    estimate: float
    r_max: float
    window_bins: int
    n_nodes: int
    n_distances: int


def fit_sphere_density(distances, bins=1000, window=0.5, grid=D_GRID):
    """Fit d to a sample of geodesic distances.

    On a d-sphere scaled so its geodesic diameter is ``2 r_max`` the density of
    distances is proportional to ``sin^(d-1)(pi r / (2 r_max))``. ``r_max`` is
    the centre of the modal histogram bin; the fit uses the contiguous run of
    bins left of the peak whose count is at least ``window`` times the peak
    count, and minimizes the squared error of the log-density over ``grid``.
    """
    distances = np.asarray(distances, dtype=float)
    distances = distances[distances > 0]
    if distances.size == 0:
        raise EstimatorError("no positive geodesic distances to fit")
    counts, edges = np.histogram(distances, bins=bins, range=(0.0, distances.max()))
    centers = (edges[:-1] + edges[1:]) / 2
    peak = int(counts.argmax())
    r_max = centers[peak]
    lo = peak
    while lo > 0 and counts[lo - 1] >= window * counts[peak]:
        lo -= 1
    sel = slice(lo, peak)  # the peak bin itself fits any d exactly
    if peak - lo < 1:
        raise EstimatorError("empty fitting window: no bin left of the peak reaches the threshold")
    y = np.log(counts[sel] / counts[peak])
    x = np.log(np.sin(np.pi * centers[sel] / (2 * r_max)))
    err = ((y[None, :] - (grid[:, None] - 1) * x[None, :]) ** 2).sum(axis=1)
    return float(grid[err.argmin()]), float(r_max), peak - lo


def geodesic_id(X, k=4, bins=1000, *, window=0.5, n_jobs=None):
    """ID from the distribution of shortest-path distances on the symmetrized kNN graph.

    All pairs inside the largest connected component are used; the component
    must hold more than half of the points.
    """
    X = check_points(X)
    check_positive_int(k, "k")
    check_positive_int(bins, "bins", minimum=2)
    if not 0 < window < 1:
        raise ConfigError(f"window must lie in (0, 1), got {window}")
    n = X.shape[0]
    graph = build_knn_graph(X, k, n_jobs=n_jobs)
    nodes = largest_component(graph)
    if 2 * len(nodes) <= n:
        raise EstimatorError(
            f"kNN graph (k={k}) is disconnected: largest component has {len(nodes)} of {n} points"
        )
    dist = geodesic_distances(graph, nodes, n_jobs=n_jobs, unique_pairs=True)
    d, r_max, width = fit_sphere_density(dist, bins, window)
    return GeodesicResult(d, r_max, width, len(nodes), len(dist))
