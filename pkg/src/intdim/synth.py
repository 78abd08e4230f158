"""Synthetic datasets of known intrinsic dimension, and hypercube noise augmentation."""

from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_points, check_positive_int
from .dataset import PointSet, _frozen
from .exceptions import ConfigError

KINDS = ("hypercube", "hypersphere", "affine")
NOISE_MODES = ("add", "replace-pixels")
_ROW_BLOCK = 4096


def orthonormal_basis(N, d, seed):
    """Seeded N x d matrix with orthonormal columns.

    QR of a Gaussian matrix, with column signs fixed so R has a positive
    diagonal; this makes Q a deterministic function of the seed.
    """
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((N, d)))
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


@dataclass(frozen=True)
class SyntheticSpec:
    """``n`` samples of a d-dimensional set embedded isometrically in R^N.

    For ``hypersphere`` the sample lives on the unit d-sphere, which needs
    ``d + 1`` coordinates before embedding, so ``N >= d + 1``.
    """

    kind: str
    d: int
    N: int
    n: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        check_positive_int(self.d, "d")
        check_positive_int(self.n, "n")
        check_positive_int(self.N, "N")
        if self.d > self.N:
            raise ConfigError(f"intrinsic dimension d={self.d} exceeds ambient N={self.N}")
        if self.kind == "hypersphere" and self.d + 1 > self.N:
            raise ConfigError(f"a {self.d}-sphere needs N >= {self.d + 1}, got N={self.N}")

    @property
    def source_dim(self):
        """Coordinates of a sample before embedding."""
        return self.d + 1 if self.kind == "hypersphere" else self.d


def _latent_block(kind, d, rows, seed):
    out = np.empty((len(rows), d + 1 if kind == "hypersphere" else d))
    for r, row in enumerate(rows):
        rng = np.random.default_rng([seed, row])
        if kind == "hypersphere":
            z = rng.standard_normal(d + 1)
            out[r] = z / np.linalg.norm(z)
        else:
            out[r] = rng.random(d)
    return out


def latent(spec):
    """Pre-embedding coordinates; row i depends only on ``(seed, i)``."""
    return _latent_block(spec.kind, spec.d, np.arange(spec.n), spec.seed)


def embedding(spec):
    """``(Q, offset)`` with ``x = Q @ u + offset``; identity and zero when d == N for hypercubes."""
    k = spec.source_dim
    if spec.kind == "hypercube" and k == spec.N:
        return np.eye(k), np.zeros(spec.N)
    Q = orthonormal_basis(spec.N, k, spec.seed)
    offset = np.zeros(spec.N)
    if spec.kind == "affine":
        offset = np.random.default_rng([spec.seed, 2**32 - 1]).standard_normal(spec.N)
    return Q, offset


def generate(spec):
    """Sample ``spec`` as a :class:`PointSet` (the spec is kept in ``meta``)."""
    Q, offset = embedding(spec)
    U = latent(spec)
    X = U @ Q.T + offset
    return PointSet(_frozen(X), None, f"{spec.kind}-d{spec.d}-N{spec.N}", {"synthetic": asdict(spec)})


@dataclass(frozen=True)
class NoiseSpec:
    """Hypercube noise of dimension ``d_noise``.

    ``add`` shifts every row by ``B @ z`` with a fixed random orthonormal
    ``B`` and ``z ~ U[0,1]^d_noise``; ``replace-pixels`` overwrites a fixed
    random set of ``d_noise`` coordinates with fresh ``U[0,1]`` values.
    """

    d_noise: int
    mode: str = "replace-pixels"
    seed: int = 0

    def __post_init__(self):
        check_positive_int(self.d_noise, "d_noise")
        if self.mode not in NOISE_MODES:
            raise ConfigError(f"mode must be one of {NOISE_MODES}, got {self.mode!r}")


def _noise_rows(rows, d_noise, seed):
    out = np.empty((len(rows), d_noise))
    for r, row in enumerate(rows):
        out[r] = np.random.default_rng([seed, 1, row]).random(d_noise)
    return out


def noise_positions(N, spec):
    """Sorted coordinates overwritten in replace-pixels mode."""
    rng = np.random.default_rng([spec.seed, 0])
    return np.sort(rng.choice(N, size=spec.d_noise, replace=False))


def apply_noise(X, spec, row_ids=None, *, z_scale=1.0):
    """Array version of :func:`add_hypercube_noise`.

    ``row_ids`` are the global row numbers that seed each row's draw, so a
    dataset can be noised in pieces with the same result. ``z_scale`` scales
    the hypercube (0 gives the identity in add mode).
    """
    X = check_points(X)
    n, N = X.shape
    if spec.d_noise > N:
        raise ConfigError(f"d_noise={spec.d_noise} exceeds the {N} coordinates of the data")
    row_ids = np.arange(n) if row_ids is None else np.asarray(row_ids)
    out = X.copy()
    if spec.mode == "add":
        B = orthonormal_basis(N, spec.d_noise, [spec.seed, 0])
    else:
        cols = noise_positions(N, spec)
    for s in range(0, n, _ROW_BLOCK):
        z = _noise_rows(row_ids[s : s + _ROW_BLOCK], spec.d_noise, spec.seed) * z_scale
        if spec.mode == "add":
            out[s : s + _ROW_BLOCK] += z @ B.T
        else:
            out[s : s + _ROW_BLOCK, cols] = z
    return out


def add_hypercube_noise(ps, spec):
    """Noise every row of ``ps`` once, as described by ``spec`` (no clipping)."""
    data = _frozen(apply_noise(ps.data, spec))
    meta = dict(ps.meta, noise=asdict(spec))
    return PointSet(data, ps.labels, ps.name, meta)


class HypercubeNoise(TransformerMixin, BaseEstimator):
    """Transformer form of :func:`add_hypercube_noise`.

    Rows are seeded by position, so transforming the same array twice gives
    the same output.
    """

    def __init__(self, d_noise=256, mode="replace-pixels", seed=0):
        self.d_noise = d_noise
        self.mode = mode
        self.seed = seed

    def fit(self, X, y=None):
        X = check_points(X)
        self.spec_ = NoiseSpec(self.d_noise, self.mode, self.seed)
        if self.d_noise > X.shape[1]:
            raise ConfigError(f"d_noise={self.d_noise} exceeds the {X.shape[1]} coordinates of the data")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_points(X)
        if X.shape[1] != self.n_features_in_:
            raise ConfigError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return apply_noise(X, self.spec_)
