import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intdim.dataset import PointSet
from intdim.estimators import (
    MLE,
    EstimateReport,
    EstimatorSpec,
    GeodesicID,
    GeoMLE,
    MleParams,
    TwoNN,
    estimate,
    estimate_k_sweep,
    fit_sphere_density,
    geodesic_id,
    geomle,
    mle_anchor,
    mle_global,
    mle_local,
    twonn,
)
from intdim.exceptions import ConfigError, EstimatorError, KnnError
from intdim.knn import knn
from intdim.synth import SyntheticSpec, generate
from oracles import cube, local_mle, mackay, random_rotation

LINE = np.array([[0.0], [1.0], [3.0]])


class TestLocal:
    def test_k2(self):
        assert mle_local(np.array([[1.0, 2.0]]), 2).values[0] == pytest.approx(1 / math.log(2), rel=1e-12)

    def test_linear_growth_k3(self):
        # two log-ratios, ln 3 and ln(3/2), normalized by k - 1
        want = 2 / (math.log(3) + math.log(1.5))
        assert mle_local(np.array([[1.0, 2.0, 3.0]]), 3).values[0] == pytest.approx(want, rel=1e-12)

    def test_ties_flagged(self):
        out = mle_local(np.array([[2.0, 2.0, 2.0], [1.0, 2.0, 4.0]]), 3)
        assert math.isinf(out.values[0]) and out.tied.tolist() == [True, False]

    def test_nonpositive_distance(self):
        with pytest.raises(EstimatorError):
            mle_local(np.array([[0.0, 1.0]]), 2)

    @given(st.lists(st.floats(0.01, 100), min_size=6, max_size=6), st.integers(2, 6))
    def test_matches_direct_formula(self, dists, k):
        row = np.sort(np.array(dists))
        got = mle_local(row[None, :], k).values[0]
        want = local_mle(row, k)
        if math.isinf(want):
            assert math.isinf(got)
        else:
            assert got == pytest.approx(want, rel=1e-10)

    def test_unbiased_normalization(self):
        row = np.array([[1.0, 2.0, 3.0, 5.0]])
        assert mle_local(row, 4, unbiased=True).values[0] == pytest.approx(local_mle(row[0], 4, norm=2))
        with pytest.raises(EstimatorError):
            mle_local(row, 2, unbiased=True)


class TestGlobal:
    def test_line_mackay(self):
        t = knn(LINE, 2)
        want = 3 / (math.log(3) + math.log(2) + math.log(1.5))
        assert mle_global(t, 2, "mackay") == pytest.approx(want, rel=1e-12)

    def test_levina_is_mean_of_locals(self):
        t = knn(LINE, 2)
        locals_ = [1 / math.log(3), 1 / math.log(2), 1 / math.log(1.5)]
        assert mle_global(t, 2, "levina") == pytest.approx(np.mean(locals_), rel=1e-12)

    def test_mackay_matches_oracle(self, rng):
        t = knn(rng.random((300, 5)), 10)
        for k in (2, 5, 10):
            assert mle_global(t, k) == pytest.approx(mackay(t.distances, k), rel=1e-12)

    def test_levina_excludes_ties_with_warning(self):
        D = np.array([[1.0, 1.0], [1.0, 2.0]])
        with pytest.warns(RuntimeWarning, match="1 infinite"):
            assert mle_global(D, 2, "levina") == pytest.approx(1 / math.log(2))
        # mackay needs no exclusion: a tie adds zero to the inverse sum
        assert mle_global(D, 2, "mackay") == pytest.approx(2 / math.log(2))

    def test_all_tied(self):
        D = np.ones((3, 3))
        for agg in ("mackay", "levina"):
            with pytest.raises(EstimatorError), warnings.catch_warnings():
                warnings.simplefilter("ignore")
                mle_global(D, 3, agg)

    def test_unknown_aggregation(self):
        with pytest.raises(EstimatorError):
            mle_global(np.ones((2, 2)) + [0, 1], 2, "median")

    @settings(max_examples=100)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 10), st.integers(20, 80), st.integers(1, 6))
    def test_harmonic_le_arithmetic(self, seed, k, n, N):
        X = np.random.default_rng(seed).standard_normal((n, N))
        t = knn(X, k)
        assert mle_global(t, k, "mackay") <= mle_global(t, k, "levina") * (1 + 1e-12)

    def test_twonn_identity(self, rng):
        for n, N in [(50, 2), (400, 7), (1000, 30)]:
            t = knn(rng.standard_normal((n, N)), 2)
            a, b = twonn(t, 0.0), mle_global(t, 2, "mackay")
            assert abs(a - b) <= 1e-12 * b


class TestTwoNN:
    def test_line(self):
        want = 3 / (math.log(3) + math.log(2) + math.log(1.5))
        assert twonn(knn(LINE, 2), 0) == pytest.approx(want, rel=1e-12)

    def test_censoring(self):
        # mu = e^1, e^2, e^3, e^4; drop one: kept logs 1,2,3 plus censored at 3
        D = np.column_stack([np.ones(4), np.exp([1.0, 2, 3, 4])])
        assert twonn(D, 0.25) == pytest.approx(3 / (1 + 2 + 3 + 3))
        assert twonn(D, 0.2) == pytest.approx(4 / 10)

    def test_pareto_sample_recovers_d(self, rng):
        # mu = U^(-1/d) is Pareto with exponent d
        d = 6.0
        mu = rng.random(200000) ** (-1 / d)
        D = np.column_stack([np.ones_like(mu), mu])
        for f in (0.0, 0.1, 0.3):
            assert twonn(D, f) == pytest.approx(d, rel=0.02)

    def test_errors(self):
        with pytest.raises(EstimatorError):
            twonn(np.ones((5, 2)), 0)
        with pytest.raises(ConfigError):
            twonn(np.ones((5, 2)), 1.0)


class TestAnchor:
    def test_alpha_one_bitwise(self, rng):
        ps = PointSet(rng.random((500, 6)))
        full = mle_global(knn(ps, 10), 10)
        assert mle_anchor(ps, MleParams(k=10, anchor_fraction=1.0)).estimate == full

    def test_floor(self, rng):
        ps = PointSet(rng.random((100, 3)))
        with pytest.raises(EstimatorError, match="32"):
            mle_anchor(ps, MleParams(k=5, anchor_fraction=0.3))
        assert mle_anchor(ps, MleParams(k=5, anchor_fraction=0.32)).extra["n_anchors"] == 32

    def test_seeded(self, rng):
        ps = PointSet(rng.random((1000, 3)))
        a = mle_anchor(ps, k=5, anchor_fraction=0.1, seed=3)
        assert a.estimate == mle_anchor(ps, k=5, anchor_fraction=0.1, seed=3).estimate
        assert a.estimate != mle_anchor(ps, k=5, anchor_fraction=0.1, seed=4).estimate

    def test_hypercube_d8(self):
        r = mle_anchor(cube(10000, 8, 128, seed=2), k=20, anchor_fraction=0.1)
        assert abs(r.estimate - 8) <= 0.15 * 8

    def test_unbiased_over_seeds(self):
        ps = cube(4000, 5, 12, seed=4)
        full = mle_global(knn(ps, 10), 10)
        vals = [mle_anchor(ps, k=10, anchor_fraction=0.1, seed=s).estimate for s in range(60)]
        se = np.std(vals, ddof=1) / math.sqrt(len(vals))
        assert abs(np.mean(vals) - full) <= 2 * se

    def test_params_validation(self):
        with pytest.raises(ConfigError):
            MleParams(k=1)
        with pytest.raises(ConfigError):
            MleParams(anchor_fraction=0)
        with pytest.raises(ConfigError):
            MleParams(aggregation="mean")
        with pytest.raises(ConfigError):
            MleParams(k=2, unbiased=True)


class TestGeoMLE:
    def test_hypercube_16(self):
        est = geomle(cube(10000, 16, seed=1).data, seed=0).estimate
        assert abs(est - 16) <= 0.2 * 16

    def test_affine_4(self):
        ps = generate(SyntheticSpec("affine", 4, 30, 5000, seed=3))
        assert abs(geomle(ps.data, M=5, seed=1).estimate - 4) <= 1

    def test_replicates_and_clamp(self, rng):
        res = geomle(rng.random((400, 3)), k1=5, k2=12, M=3)
        assert len(res.per_replicate) == 3 and np.all(res.per_replicate > 0)
        assert res.estimate == pytest.approx(res.per_replicate.mean())

    def test_validation(self, rng):
        X = rng.random((50, 2))
        with pytest.raises(ConfigError):
            geomle(X, k1=10, k2=10)
        with pytest.raises(ConfigError):
            geomle(X, M=1)
        with pytest.raises(EstimatorError):
            geomle(X, k1=20, k2=55, M=2)


class TestGeodesic:
    def test_sphere(self, rng):
        z = rng.standard_normal((5000, 3))
        S = z / np.linalg.norm(z, axis=1, keepdims=True)
        assert abs(geodesic_id(S, k=4).estimate - 2) <= 0.5

    def test_circle_r10(self, rng):
        t = rng.random(2000) * 2 * np.pi
        C = np.zeros((2000, 10))
        C[:, 0], C[:, 1] = np.cos(t), np.sin(t)
        # with k=4 a uniform circle sample of this size splits into arcs
        with pytest.raises(EstimatorError, match="disconnected"):
            geodesic_id(C, k=4)
        assert abs(geodesic_id(C, k=10).estimate - 1) <= 0.3

    def test_fit_recovers_sphere_law(self):
        # evenly spaced quantiles of the exact sphere distance law
        r = np.linspace(0, np.pi, 400001)
        for d in (2.0, 5.0, 12.0):
            cdf = np.cumsum(np.sin(r) ** (d - 1))
            cdf /= cdf[-1]
            sample = np.interp((np.arange(2_000_000) + 0.5) / 2_000_000, cdf, r)
            est, r_max, width = fit_sphere_density(sample, bins=400)
            assert est == pytest.approx(d, abs=0.15)
            assert r_max == pytest.approx(np.pi / 2, rel=0.01)

    def test_empty_window(self):
        sample = np.r_[np.full(100, 1.0), np.full(5, 3.0)]
        with pytest.raises(EstimatorError, match="window"):
            fit_sphere_density(sample, bins=10)


def _all_specs():
    return [
        EstimatorSpec("mle", {"k": 8}),
        EstimatorSpec("mle", {"k": 8, "aggregation": "levina"}),
        EstimatorSpec("mle", {"k": 8, "anchor_fraction": 0.2, "unbiased": True}),
        EstimatorSpec("twonn"),
        EstimatorSpec("geomle", {"k1": 6, "k2": 14, "M": 3}),
        EstimatorSpec("geodesic", {"k": 6, "bins": 60}),
    ]


@pytest.fixture(scope="module")
def base_points():
    rng = np.random.default_rng(77)
    return generate(SyntheticSpec("hypersphere", 3, 6, 800, seed=9)).data + rng.normal(0, 1e-3, (800, 6))


@pytest.mark.parametrize("spec", _all_specs(), ids=lambda s: f"{s.name}-{hash(str(s.params)) % 1000}")
class TestInvariance:
    @pytest.mark.parametrize("c", [7.3, 0.01])
    def test_scale(self, spec, base_points, c):
        a = estimate(base_points, spec, seed=1).estimate
        b = estimate(base_points * c, spec, seed=1).estimate
        assert abs(a - b) <= 1e-9 * a

    def test_isometry(self, spec, base_points):
        Y = base_points @ random_rotation(6, 1).T + np.arange(6) * 3.0
        a = estimate(base_points, spec, seed=1).estimate
        assert abs(estimate(Y, spec, seed=1).estimate - a) <= 1e-9 * a

    def test_zero_padding(self, spec, base_points):
        Y = np.hstack([base_points, np.full((len(base_points), 5), 2.5)])
        a = estimate(base_points, spec, seed=1).estimate
        assert abs(estimate(Y, spec, seed=1).estimate - a) <= 1e-9 * a


class TestDispatch:
    def test_report_fields(self, rng):
        X = rng.random((300, 4))
        r = estimate(np.vstack([X, X[:7]]), EstimatorSpec("mle", {"k": 5}), seed=11)
        assert r.dedup_removed == 7 and r.n_used == 300 and r.N == 4 and r.seed == 11
        assert r.per_replicate == [r.estimate] and r.stderr == 0 and r.runtime_ms >= 0
        d = r.to_dict()
        assert d["params"]["k"] == 5 and d["extra"]["n_anchors"] == 300

    def test_duplicates_without_dedup(self, rng):
        X = rng.random((30, 2))
        with pytest.raises(KnnError):
            estimate(np.vstack([X, X]), "twonn", dedup=False)

    def test_one_point(self):
        with pytest.raises(KnnError):
            estimate(np.zeros((1, 3)), "mle")

    def test_spec_forms(self, rng):
        X = rng.random((100, 3))
        a = estimate(X, {"name": "mle", "k": 6}).estimate
        assert a == estimate(X, EstimatorSpec("mle", {"k": 6})).estimate
        with pytest.raises(ConfigError):
            EstimatorSpec("pca")
        with pytest.raises(ConfigError):
            EstimatorSpec("twonn", {"k": 3})

    def test_sweep_reuses_one_table(self, rng):
        X = rng.random((400, 5))
        reports = estimate_k_sweep(X, [3, 5, 10])
        t = knn(X, 10)
        assert [r.estimate for r in reports] == [mle_global(t, k) for k in (3, 5, 10)]

    def test_geodesic_sample_cap(self, rng):
        z = rng.standard_normal((1500, 3))
        S = z / np.linalg.norm(z, axis=1, keepdims=True)
        r = estimate(S, EstimatorSpec("geodesic", {"sample_cap": 1000, "bins": 200}), seed=2)
        assert r.n_used == 1000 and r.extra["component_size"] <= 1000

    def test_report_invariants(self):
        with pytest.raises(EstimatorError):
            EstimateReport("x", {}, float("nan"), [1.0], 0.0, 1, 1)
        with pytest.raises(EstimatorError):
            EstimateReport("x", {}, 1.0, [], 0.0, 1, 1)


class TestSklearnApi:
    def test_fit_sets_dimension(self, rng):
        X = cube(3000, 3, 10).data
        m = MLE(k=10).fit(X)
        assert m.dimension_ == pytest.approx(3, rel=0.15)
        assert m.report_.estimator == "mle" and m.n_features_in_ == 10
        assert TwoNN().fit_predict(X) == pytest.approx(3, rel=0.2)

    def test_params_round_trip(self):
        from sklearn.base import clone

        est = GeoMLE(k1=5, k2=9, M=2)
        assert clone(est).get_params() == est.get_params()
        assert GeodesicID().set_params(k=7).k == 7
        assert MLE().get_params()["aggregation"] == "mackay"

    def test_invalid_input(self):
        with pytest.raises(ValueError):
            MLE().fit(np.array([[np.inf, 1.0], [0.0, 1.0]]))
