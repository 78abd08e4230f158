import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intdim.dataset import PointSet
from intdim.exceptions import FormatError, KnnError
from intdim.knn import (
    KnnGraph,
    build_knn_graph,
    cached_knn,
    geodesic_distances,
    knn,
    load_neighbor_table,
    save_neighbor_table,
)
from oracles import floyd_warshall, naive_knn, random_rotation


def assert_same_table(table, dist, idx):
    np.testing.assert_array_equal(table.neighbor_indices, idx)
    np.testing.assert_allclose(table.distances, dist, rtol=1e-12, atol=0)


def test_three_points():
    t = knn(np.array([[0.0], [1.0], [3.0]]), 2, anchors=[0])
    np.testing.assert_array_equal(t.distances, [[1.0, 3.0]])
    np.testing.assert_array_equal(t.neighbor_indices, [[1, 2]])


def test_k_equals_n_minus_one_is_permutation(rng):
    X = rng.random((9, 3))
    t = knn(X, 8)
    for i, row in enumerate(t.neighbor_indices):
        assert sorted(row) == [j for j in range(9) if j != i]


def test_matches_naive_oracle_r16(rng):
    X = rng.standard_normal((200, 16))
    dist, idx = naive_knn(X, 10)
    assert_same_table(knn(X, 10), dist, idx)
    assert_same_table(knn(X, 10, n_jobs=4, block_size=13), dist, idx)


@pytest.mark.parametrize("n,N,k", [(500, 8, 20), (400, 64, 5), (300, 3, 1)])
def test_exact_up_to_500(rng, n, N, k):
    # badly scaled coordinates far from the origin stress the float32 screen
    X = rng.standard_normal((n, N)) * np.logspace(-3, 3, N) + 1e4
    dist, idx = naive_knn(X, k)
    t, stats = knn(X, k, return_stats=True)
    assert not stats["exact"]
    assert_same_table(t, dist, idx)


@settings(max_examples=30)
@given(st.integers(5, 60), st.integers(1, 4), st.data())
def test_ties_broken_by_index(n, N, data):
    # a small integer grid forces many exact distance ties
    rows = data.draw(st.lists(st.tuples(*[st.integers(0, 3)] * N), min_size=n, max_size=n, unique=True))
    X = np.array(rows, dtype=float)
    n = len(X)
    k = data.draw(st.integers(1, n - 1))
    dist, idx = naive_knn(X, k)
    t = knn(X, k)
    assert_same_table(t, dist, idx)
    assert_same_table(knn(X, k, exact=True), dist, idx)


def test_anchor_subset(rng):
    X = rng.random((120, 5))
    anchors = np.array([3, 77, 5, 119])
    dist, idx = naive_knn(X, 7, anchors)
    t = knn(X, 7, anchors)
    np.testing.assert_array_equal(t.anchor_indices, anchors)
    assert_same_table(t, dist, idx)


def test_determinism_across_workers(rng):
    X = rng.standard_normal((700, 20))
    base = knn(X, 12, n_jobs=1)
    for jobs, block in [(2, None), (3, 17), (8, 1)]:
        other = knn(X, 12, n_jobs=jobs, block_size=block)
        assert np.array_equal(other.distances, base.distances)
        assert np.array_equal(other.neighbor_indices, base.neighbor_indices)


def test_prefix_monotonicity(rng):
    X = rng.standard_normal((300, 6))
    big = knn(X, 25)
    for k in (1, 4, 24):
        small = knn(X, k)
        assert np.array_equal(small.distances, big.distances[:, :k])
        assert np.array_equal(small.neighbor_indices, big.neighbor_indices[:, :k])
        assert np.array_equal(big.truncate(k).distances, small.distances)


def test_isometry(rng):
    X = rng.standard_normal((250, 12))
    Y = X @ random_rotation(12, 5).T + rng.standard_normal(12) * 10
    a, b = knn(X, 8), knn(Y, 8)
    np.testing.assert_array_equal(a.neighbor_indices, b.neighbor_indices)
    np.testing.assert_allclose(a.distances, b.distances, rtol=1e-9)


def test_table_invariants(rng):
    t = knn(rng.random((150, 4)), 9)
    assert np.all(t.distances[:, 0] > 0)
    assert np.all(np.diff(t.distances, axis=1) >= 0)
    for a, row in zip(t.anchor_indices, t.neighbor_indices):
        assert len(set(row)) == len(row) and a not in row


def test_errors(rng):
    X = rng.random((5, 2))
    with pytest.raises(KnnError):
        knn(X, 5)
    with pytest.raises(KnnError):
        knn(X, 0)
    with pytest.raises(KnnError):
        knn(X, 2, anchors=[5])
    with pytest.raises(KnnError, match="duplicate"):
        knn(np.vstack([X, X[:1]]), 2)
    with pytest.raises(KnnError):
        knn(X[:1], 1)


def test_pointset_input(rng):
    X = rng.random((40, 3))
    assert np.array_equal(knn(PointSet(X), 3).distances, knn(X, 3).distances)


class TestGraph:
    def test_collinear_symmetrization(self):
        g = build_knn_graph(np.array([[0.0], [1.0], [3.0]]), 1)
        assert sorted(zip(g.rows.tolist(), g.cols.tolist())) == [(0, 1), (1, 2)]
        np.testing.assert_array_equal(g.weights[np.argsort(g.rows)], [1.0, 2.0])

    def test_complete_when_k_is_n_minus_one(self, rng):
        g = build_knn_graph(rng.random((7, 2)), 6)
        assert g.n_edges == 21

    def test_degree_at_least_k(self, rng):
        g = build_knn_graph(rng.random((200, 3)), 5)
        assert g.degrees().min() >= 5
        assert np.all(g.rows < g.cols) and np.all(g.weights > 0)

    def test_path_geodesics(self):
        g = KnnGraph(3, np.array([0, 1]), np.array([1, 2]), np.array([1.0, 2.0]))
        np.testing.assert_array_equal(np.sort(geodesic_distances(g, [0])), [1.0, 3.0])

    def test_complete_graph_is_euclidean(self, rng):
        X = rng.random((30, 3))
        g = build_knn_graph(X, 29)
        got = np.sort(geodesic_distances(g, [4]))
        want = np.sort(np.linalg.norm(np.delete(X, 4, 0) - X[4], axis=1))
        np.testing.assert_allclose(got, want, rtol=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_against_floyd_warshall(self, seed):
        X = np.random.default_rng(seed).random((90, 2))
        g = build_knn_graph(X, 4)
        D = floyd_warshall(g.n, zip(g.rows, g.cols, g.weights))
        comp = np.flatnonzero(np.isfinite(D[np.argmax(np.isfinite(D).sum(1))]))
        got = np.sort(geodesic_distances(g, comp, n_jobs=3, chunk=7))
        sub = D[np.ix_(comp, comp)]
        np.testing.assert_allclose(got, np.sort(sub[sub > 0]), rtol=1e-12)
        half = np.sort(geodesic_distances(g, comp, unique_pairs=True))
        np.testing.assert_allclose(half, np.sort(sub[np.triu_indices(len(comp), 1)]), rtol=1e-12)

    def test_sources_outside_largest_component(self):
        # two clusters: 4 points near 0, 2 points near 100
        X = np.array([[0.0], [1], [2], [3], [100], [101]])
        g = build_knn_graph(X, 1)
        with pytest.raises(KnnError):
            geodesic_distances(g, [4, 5])
        assert len(geodesic_distances(g, [0, 4])) == 3


class TestCache:
    def test_round_trip(self, tmp_path, rng):
        X = rng.random((60, 3))
        t = knn(X, 6, anchors=[1, 2, 50])
        save_neighbor_table(t, tmp_path / "t.hdr", checksum="abc", n_points=60)
        back, header = load_neighbor_table(tmp_path / "t.hdr")
        assert header["dataset_sha256"] == "abc" and int(header["k"]) == 6
        assert np.array_equal(back.distances, t.distances)
        assert np.array_equal(back.neighbor_indices, t.neighbor_indices)
        assert np.array_equal(back.anchor_indices, t.anchor_indices)

    def test_reuse_and_truncate(self, tmp_path, rng):
        ps = PointSet(rng.random((80, 4)))
        big = cached_knn(ps, 10, cache_dir=tmp_path)
        files = sorted(tmp_path.iterdir())
        small = cached_knn(ps, 4, cache_dir=tmp_path)
        assert sorted(tmp_path.iterdir()) == files
        assert np.array_equal(small.distances, big.distances[:, :4])
        # a larger k recomputes
        assert cached_knn(ps, 12, cache_dir=tmp_path).k == 12
        other = PointSet(ps.data * 2)
        assert np.array_equal(cached_knn(other, 4, cache_dir=tmp_path).distances, 2 * small.distances)

    def test_corrupt_anchor_digest(self, tmp_path, rng):
        t = knn(rng.random((20, 2)), 3)
        save_neighbor_table(t, tmp_path / "t.hdr", checksum="x", n_points=20)
        text = (tmp_path / "t.hdr").read_text().replace("anchors_sha256 = ", "anchors_sha256 = 0")
        (tmp_path / "t.hdr").write_text(text)
        with pytest.raises(FormatError):
            load_neighbor_table(tmp_path / "t.hdr")
