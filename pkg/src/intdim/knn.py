"""Exact Euclidean k-nearest neighbors and kNN-graph geodesics.

The search is brute force. Candidates are screened with a blocked float32
GEMM (``|y|^2 - 2 x.y``); a per-row rounding-error bound then certifies that
every point outside the candidate set is strictly farther than the k-th
candidate, and the candidates are re-ranked on exact float64 distances
accumulated left to right over coordinates. Rows that fail the certificate
fall back to an exact scan of the whole dataset. The result is therefore the
same as a naive double loop, for any block size or worker count.
"""

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from threadpoolctl import threadpool_limits

from . import formats
from ._validation import check_points, resolve_n_jobs
from .exceptions import FormatError, KnnError

_U32 = 2.0**-24
_U64 = 2.0**-53
_BLOCK_BYTES = 256 * 2**20


@dataclass(frozen=True)
class NeighborTable:
    """Sorted neighbor distances of ``anchor_indices`` over a whole dataset.

    Row ``i`` holds the ``k`` nearest points to ``anchor_indices[i]``, self
    excluded, ascending by distance with ties broken by dataset index.
    """

    anchor_indices: np.ndarray
    distances: np.ndarray
    neighbor_indices: np.ndarray

    @property
    def k(self):
        return self.distances.shape[1]

    @property
    def n_anchors(self):
        return self.distances.shape[0]

    def truncate(self, k):
        """The table for a smaller ``k`` (a column prefix of this one)."""
        if not 1 <= k <= self.k:
            raise KnnError(f"cannot truncate a k={self.k} table to k={k}")
        if k == self.k:
            return self
        return NeighborTable(
            self.anchor_indices, self.distances[:, :k].copy(), self.neighbor_indices[:, :k].copy()
        )

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.intp)
        return NeighborTable(
            self.anchor_indices[rows], self.distances[rows], self.neighbor_indices[rows]
        )


@njit(nogil=True, cache=True)
def _sqdist_pairs(X, anchors, cand, out):
    # left-to-right accumulation; no fastmath, so LLVM keeps the order
    dim = X.shape[1]
    for r in range(cand.shape[0]):
        i = anchors[r]
        for c in range(cand.shape[1]):
            j = cand[r, c]
            s = 0.0
            for t in range(dim):
                d = X[i, t] - X[j, t]
                s += d * d
            out[r, c] = s


@njit(nogil=True, cache=True)
def _sqdist_all(X, i, out):
    dim = X.shape[1]
    for j in range(X.shape[0]):
        s = 0.0
        for t in range(dim):
            d = X[i, t] - X[j, t]
            s += d * d
        out[j] = s


def _as_points(ps):
    data = getattr(ps, "data", ps)
    return check_points(data)


def _check_anchors(anchors, n):
    if anchors is None:
        return np.arange(n, dtype=np.int64)
    anchors = np.asarray(anchors)
    if anchors.ndim != 1 or anchors.dtype.kind not in "iu":
        raise KnnError("anchors must be a 1-D integer vector")
    if anchors.size and (anchors.min() < 0 or anchors.max() >= n):
        raise KnnError(f"anchor indices must lie in [0, {n})")
    return anchors.astype(np.int64)


def _rank_rows(d2, idx, k):
    """Sort each row by (squared distance, index) and keep ``k`` columns."""
    order = np.lexsort((idx, d2), axis=-1)[:, :k]
    return np.take_along_axis(d2, order, 1), np.take_along_axis(idx, order, 1)


def _exact_row(X, i, k):
    d2 = np.empty(X.shape[0])
    _sqdist_all(X, i, d2)
    d2[i] = np.inf
    idx = np.arange(X.shape[0], dtype=np.int64)
    order = np.lexsort((idx, d2))[:k]
    return d2[order], idx[order]


def _check_no_zero(d2, anchors, idx):
    bad = np.flatnonzero(d2[:, 0] <= 0.0)
    if bad.size:
        r = bad[0]
        raise KnnError(
            f"zero distance between rows {anchors[r]} and {idx[r, 0]}: "
            "dataset contains duplicate rows (run deduplicate first)"
        )


class _Screen:
    """Float32 screening state shared read-only by all blocks."""

    def __init__(self, X):
        n, dim = X.shape
        center = X.mean(axis=0)
        Y = np.empty((n, dim), dtype=np.float32)
        r2 = np.empty(n)
        step = max(1, _BLOCK_BYTES // (8 * dim))
        for s in range(0, n, step):
            block = X[s : s + step] - center
            Y[s : s + step] = block
            r2[s : s + step] = np.einsum("ij,ij->i", block, block)
        sq_self = np.empty(n)
        for s in range(0, n, step):
            block = Y[s : s + step].astype(np.float64)
            sq_self[s : s + step] = np.einsum("ij,ij->i", block, block)
        self.Y = Y
        self.sq_self = sq_self
        self.sq32 = sq_self.astype(np.float32)
        radius = np.sqrt(r2) * (1 + 2 * _U32)
        big_r = radius.max()
        gamma = (dim + 2) * _U32 / (1 - (dim + 2) * _U32)
        # |(key + |y_i|^2) - d^2| <= err: f32 rounding of centered inputs, GEMM, and the key update
        self.err = 1.01 * (
            2 * _U32 * (radius + big_r) ** 2
            + 2 * gamma * radius * big_r
            + 2 * _U32 * big_r**2
            + 2 * _U32 * radius * big_r
        ) + 1e-12 * (radius + big_r) ** 2
        self.dim = dim


def _knn_block(X, screen, anchors, k, c, out_d2, out_idx):
    n = X.shape[0]
    b = len(anchors)
    rows = np.arange(b)
    key = screen.Y[anchors] @ screen.Y.T
    key *= -2.0
    key += screen.sq32
    key[rows, anchors] = np.inf
    part = np.argpartition(key, c - 1, axis=1)
    cand = np.ascontiguousarray(part[:, :c])
    threshold = key[rows, part[:, c - 1]].astype(np.float64)
    del key, part

    d2 = np.empty((b, c))
    _sqdist_pairs(X, anchors, cand, d2)
    d2, idx = _rank_rows(d2, cand, k)

    # non-candidates satisfy key >= threshold, hence d^2 >= threshold + |y_i|^2 - err
    lower = (threshold + screen.sq_self[anchors] - screen.err[anchors]) * (1 - screen.dim * _U64)
    failed = np.flatnonzero(~(lower > d2[:, k - 1]))
    for r in failed:
        d2[r], idx[r] = _exact_row(X, anchors[r], k)
    out_d2[:] = d2
    out_idx[:] = idx
    return len(failed)


def _exact_block(X, anchors, k, out_d2, out_idx):
    for r, i in enumerate(anchors):
        out_d2[r], out_idx[r] = _exact_row(X, i, k)
    return 0


def knn(ps, k, anchors=None, *, n_jobs=None, block_size=None, exact=False, return_stats=False):
    """Exact ``k`` nearest neighbors of ``anchors`` (default: every row) over all of ``ps``.

    Parameters
    ----------
    ps : PointSet or array-like of shape (n, N)
    k : int
        Neighbors per anchor, ``1 <= k <= n - 1``.
    anchors : int array, optional
        Row indices to query; the search always runs over the full dataset.
    n_jobs : int, optional
        Worker threads; defaults to ``$INTDIM_THREADS`` or all cores. The output
        does not depend on it.
    block_size : int, optional
        Anchors per GEMM block; by default sized to ~256 MiB of scratch.
    exact : bool
        Skip float32 screening and scan every pair exactly.
    return_stats : bool
        Also return a dict with the number of rows that needed the exact fallback.

    Raises
    ------
    KnnError
        If ``k >= n`` or a zero distance (duplicate row) is met.
    """
    X = _as_points(ps)
    n = X.shape[0]
    if isinstance(k, bool) or int(k) != k or not 1 <= k <= n - 1:
        raise KnnError(f"k must satisfy 1 <= k <= n - 1 = {n - 1}, got {k}")
    k = int(k)
    anchors = _check_anchors(anchors, n)
    m = len(anchors)
    n_jobs = resolve_n_jobs(n_jobs)
    c = min(n - 1, max(2 * k, k + 16))
    use_exact = exact or c >= n - 1

    if block_size is None:
        block_size = max(1, min(4096, _BLOCK_BYTES // (12 * n)))
    starts = list(range(0, m, block_size))
    out_d2 = np.empty((m, k))
    out_idx = np.empty((m, k), dtype=np.int64)

    screen = None if use_exact else _Screen(X)

    def run(s):
        e = min(m, s + block_size)
        if use_exact:
            return _exact_block(X, anchors[s:e], k, out_d2[s:e], out_idx[s:e])
        return _knn_block(X, screen, anchors[s:e], k, c, out_d2[s:e], out_idx[s:e])

    if n_jobs == 1 or len(starts) == 1:
        fallbacks = sum(run(s) for s in starts)
    else:
        with threadpool_limits(limits=1, user_api="blas"), ThreadPoolExecutor(n_jobs) as pool:
            fallbacks = sum(pool.map(run, starts))

    if m:
        _check_no_zero(out_d2, anchors, out_idx)
    table = NeighborTable(anchors, np.sqrt(out_d2), out_idx)
    if return_stats:
        return table, {"fallback_rows": int(fallbacks), "candidates": c, "exact": use_exact}
    return table


# -- kNN graph ----------------------------------------------------------------


@dataclass(frozen=True)
class KnnGraph:
    """Undirected weighted kNN graph; each edge stored once with ``rows < cols``."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray

    @property
    def n_edges(self):
        return len(self.weights)

    def to_csr(self):
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        w = np.concatenate([self.weights, self.weights])
        return coo_matrix((w, (r, c)), shape=(self.n, self.n)).tocsr()

    def degrees(self):
        return np.bincount(self.rows, minlength=self.n) + np.bincount(self.cols, minlength=self.n)


def build_knn_graph(ps, k, *, n_jobs=None):
    """Symmetrized kNN graph: ``i -- j`` whenever either lists the other among its ``k`` neighbors."""
    X = _as_points(ps)
    n = X.shape[0]
    table = knn(X, k, n_jobs=n_jobs)
    src = np.repeat(table.anchor_indices, k)
    dst = table.neighbor_indices.ravel()
    w = table.distances.ravel()
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    # d(i, j) and d(j, i) are computed identically, so duplicate edges carry equal weights
    _, first = np.unique(lo * n + hi, return_index=True)
    return KnnGraph(n, lo[first], hi[first], w[first])


def largest_component(g):
    """Node indices of the largest connected component (lowest label wins ties)."""
    _, labels = connected_components(g.to_csr(), directed=False)
    return np.flatnonzero(labels == np.bincount(labels).argmax())


def geodesic_distances(g, sources, *, n_jobs=None, unique_pairs=False, chunk=256):
    """Shortest-path distances from each source to every node it reaches.

    Only sources inside the largest connected component are used. Distances
    from all of them are pooled into one flat array with zeros (the sources
    themselves) removed. With ``unique_pairs`` a pair of sources contributes
    its distance once rather than twice.
    """
    comp = largest_component(g)
    local = np.full(g.n, -1, dtype=np.int64)
    local[comp] = np.arange(len(comp))
    sources = np.asarray(sources, dtype=np.int64)
    sources = sources[local[sources] >= 0]
    if sources.size == 0:
        raise KnnError("no source lies in the largest connected component")
    graph = g.to_csr()[comp][:, comp]
    src_local = local[sources]
    is_source = np.zeros(len(comp), dtype=bool)
    is_source[src_local] = True
    target = np.arange(len(comp))

    def run(s):
        block = src_local[s : s + chunk]
        dist = dijkstra(graph, directed=False, indices=block)
        keep = dist > 0
        if unique_pairs:
            keep &= ~is_source[None, :] | (target[None, :] > block[:, None])
        return dist[keep]

    starts = range(0, len(src_local), chunk)
    n_jobs = resolve_n_jobs(n_jobs)
    if n_jobs == 1:
        parts = [run(s) for s in starts]
    else:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(run, starts))
    return np.concatenate(parts)


# -- neighbor-table cache -----------------------------------------------------


def _anchor_digest(anchors):
    return hashlib.sha256(np.ascontiguousarray(anchors, dtype="<i8").tobytes()).hexdigest()


def save_neighbor_table(table, header_path, *, checksum, n_points, extra=None):
    """Write ``table`` as a float64 raw tensor ``[anchor | distances | neighbors]``."""
    k = table.k
    packed = np.empty((table.n_anchors, 1 + 2 * k))
    packed[:, 0] = table.anchor_indices
    packed[:, 1 : 1 + k] = table.distances
    packed[:, 1 + k :] = table.neighbor_indices
    meta = {
        "kind": "neighbor-table",
        "k": k,
        "n_points": n_points,
        "dataset_sha256": checksum,
        "anchors_sha256": _anchor_digest(table.anchor_indices),
    }
    meta.update(extra or {})
    return formats.write_raw_tensor(header_path, packed, dtype="float64", extra=meta)


def load_neighbor_table(header_path):
    """Inverse of :func:`save_neighbor_table`; returns ``(table, header)``."""
    packed, _, header = formats.read_raw_tensor(header_path)
    if header.get("kind") != "neighbor-table":
        raise FormatError(f"{header_path}: not a neighbor-table header")
    k = int(header["k"])
    if packed.shape[1] != 1 + 2 * k:
        raise FormatError(f"{header_path}: payload width {packed.shape[1]} does not match k={k}")
    table = NeighborTable(
        packed[:, 0].astype(np.int64),
        np.ascontiguousarray(packed[:, 1 : 1 + k]),
        packed[:, 1 + k :].astype(np.int64),
    )
    if header.get("anchors_sha256") != _anchor_digest(table.anchor_indices):
        raise FormatError(f"{header_path}: anchor list does not match its digest")
    return table, header


def cached_knn(ps, k, anchors=None, *, cache_dir, n_jobs=None):
    """:func:`knn` backed by an on-disk cache keyed by dataset checksum and anchor list.

    A cached table with a larger ``k`` is reused by truncation.
    """
    X = _as_points(ps)
    checksum = ps.checksum() if hasattr(ps, "checksum") else checksum_points(X)
    anchors = _check_anchors(anchors, X.shape[0])
    key = hashlib.sha256((checksum + _anchor_digest(anchors)).encode()).hexdigest()[:24]
    cache_dir = Path(cache_dir)
    header_path = cache_dir / f"knn-{key}.hdr"
    if header_path.exists():
        try:
            table, header = load_neighbor_table(header_path)
        except FormatError:
            table = None
        else:
            if header.get("dataset_sha256") == checksum and table.k >= k:
                return table.truncate(k)
    table = knn(X, k, anchors, n_jobs=n_jobs)
    save_neighbor_table(table, header_path, checksum=checksum, n_points=X.shape[0])
    return table


def checksum_points(X):
    """Same digest as :meth:`PointSet.checksum` for a bare array."""
    X = np.ascontiguousarray(X, dtype="<f8")
    h = hashlib.sha256(np.asarray(X.shape, dtype="<i8").tobytes())
    h.update(X)
    return h.hexdigest()

