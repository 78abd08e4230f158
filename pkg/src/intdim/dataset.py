"""Point-cloud data model, ingestion and dataset transforms."""

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import formats
from ._validation import check_points
from .exceptions import DatasetError

SOURCE_KINDS = ("idx", "cifar10-binary", "csv", "raw-tensor", "image-directory")
_KIND_ALIASES = {
    "mnist": "idx",
    "mnist-idx": "idx",
    "cifar": "cifar10-binary",
    "cifar10": "cifar10-binary",
    "cifar-10": "cifar10-binary",
    "raw": "raw-tensor",
    "images": "image-directory",
}


@dataclass(frozen=True)
class PointSet:
    """``n`` points in ``N`` ambient dimensions, with optional integer labels.

    ``data`` is stored as a read-only float64 array, so a PointSet can be
    shared between workers without copying.
    """

    data: np.ndarray
    labels: Optional[np.ndarray] = None
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        data = check_points(self.data)
        if data is self.data and data.flags.writeable:
            data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.ndim != 1 or len(labels) != len(data):
                raise DatasetError(
                    f"labels must be a vector of length {len(data)}, got shape {labels.shape}"
                )
            if labels.dtype.kind not in "iu":
                if not np.all(labels == np.round(labels)):
                    raise DatasetError("labels must be integers")
            labels = labels.astype(np.int64)
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self):
        return self.data.shape[0]

    @property
    def n_features(self):
        return self.data.shape[1]

    def __len__(self):
        return self.data.shape[0]

    def take(self, indices, name=None):
        """Rows ``indices`` (in the given order) as a new PointSet."""
        indices = np.asarray(indices, dtype=np.intp)
        labels = None if self.labels is None else self.labels[indices]
        return PointSet(
            _frozen(self.data[indices]), labels, self.name if name is None else name, dict(self.meta)
        )

    def checksum(self):
        """SHA-256 over shape and float64 payload; identifies a dataset in caches."""
        h = hashlib.sha256()
        h.update(np.asarray(self.data.shape, dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(self.data, dtype="<f8"))
        return h.hexdigest()


@dataclass(frozen=True)
class DatasetSource:
    """Where and how to read a dataset.

    ``resize`` is an optional ``(h, w, c)`` target applied with nearest-neighbor
    interpolation (image formats only). ``label_column`` marks the last CSV
    column as integer labels.
    """

    kind: str
    path: str
    scale: bool = True
    resize: Optional[tuple] = None
    label_column: bool = False

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind, self.kind)
        if kind not in SOURCE_KINDS:
            raise DatasetError(f"unknown dataset kind {self.kind!r}; expected one of {SOURCE_KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.resize is not None:
            resize = tuple(int(v) for v in self.resize)
            if len(resize) != 3 or min(resize) < 1:
                raise DatasetError(f"resize must be a positive (h, w, c) triple, got {self.resize!r}")
            object.__setattr__(self, "resize", resize)

    @classmethod
    def parse(cls, spec, **options):
        """Build a source from ``"kind:path"`` (e.g. ``"mnist-idx:/data/mnist"``)."""
        kind, sep, path = str(spec).partition(":")
        if not sep or not path:
            raise DatasetError(f"dataset must be given as kind:path, got {spec!r}")
        return cls(kind=kind, path=path, **options)


def _frozen(array):
    """Mark a freshly built array read-only so PointSet adopts it without copying."""
    array.flags.writeable = False
    return array


def _images_to_pointset(images, labels, scale, resize, name):
    if images.ndim == 3:
        images = images[:, :, :, None]
    n, h, w, c = images.shape
    flat = images.reshape(n, h * w * c).astype(np.float64)
    if scale:
        flat /= 255.0
    ps = PointSet(_frozen(flat), labels, name, {"image_shape": (h, w, c), "scaled": bool(scale)})
    if resize is not None:
        ps = resize_nearest(ps, *resize, src_shape=(h, w, c))
    return ps


def load(source):
    """Read ``source`` into a :class:`PointSet`.

    Images are flattened row-major with channels interleaved; pixel values are
    divided by 255 when ``source.scale`` is set.
    """
    if isinstance(source, (str, Path)):
        source = DatasetSource.parse(source)
    kind, path = source.kind, Path(source.path)
    if not path.exists():
        raise DatasetError(f"{path}: no such file or directory")
    name = f"{kind}:{path}"
    if kind == "idx":
        images, labels = formats.read_idx_dataset(path)
        return _images_to_pointset(images, labels, source.scale, source.resize, name)
    if kind == "cifar10-binary":
        images, labels = formats.read_cifar10(path)
        return _images_to_pointset(images, labels, source.scale, source.resize, name)
    if kind == "image-directory":
        images, _ = formats.read_image_directory(path)
        return _images_to_pointset(images, None, source.scale, source.resize, name)
    if source.resize is not None:
        raise DatasetError(f"resize is only supported for image formats, not {kind}")
    if kind == "csv":
        data, labels = formats.read_csv(path, label_column=source.label_column)
        return PointSet(data, labels, name)
    data, labels, header = formats.read_raw_tensor(path)
    return PointSet(_frozen(data), labels, header.get("name", name), {"header": header})


def save_raw_tensor(ps, header_path, *, dtype="float32", extra=None):
    """Persist ``ps`` in the raw-tensor format (see :mod:`intdim.formats`)."""
    extra = dict(extra or {})
    if ps.name and "name" not in extra:
        extra["name"] = ps.name
    return formats.write_raw_tensor(header_path, ps.data, ps.labels, dtype=dtype, extra=extra)


def resize_nearest(ps, h, w, c, src_shape):
    """Resample every row, viewed as an image of ``src_shape``, to ``(h, w, c)``.

    Output index ``i`` along each axis reads source index ``floor(i * src / dst)``,
    channels included (1 -> 3 channels replicates the gray plane).
    """
    sh, sw, sc = (int(v) for v in src_shape)
    if sh * sw * sc != ps.n_features:
        raise DatasetError(
            f"source shape {(sh, sw, sc)} has {sh * sw * sc} entries, rows have {ps.n_features}"
        )
    if min(h, w, c) < 1:
        raise DatasetError(f"target shape must be positive, got {(h, w, c)}")
    if (h, w, c) == (sh, sw, sc):
        return ps
    ri = (np.arange(h) * sh) // h
    ci = (np.arange(w) * sw) // w
    ki = (np.arange(c) * sc) // c
    # flat source index for every output position, row-major (h, w, c)
    flat_index = (ri[:, None, None] * sw + ci[None, :, None]) * sc + ki[None, None, :]
    data = _frozen(ps.data[:, flat_index.ravel()])
    meta = dict(ps.meta, image_shape=(h, w, c))
    return PointSet(data, ps.labels, ps.name, meta)


def filter_classes(ps, classes):
    """Rows whose label is in ``classes``, original order preserved."""
    if ps.labels is None:
        raise DatasetError("filter_classes needs a labelled PointSet")
    wanted = np.asarray(sorted({int(c) for c in classes}), dtype=np.int64)
    mask = np.isin(ps.labels, wanted)
    if not mask.any():
        raise DatasetError(f"no rows carry labels {wanted.tolist()}")
    if mask.all():
        return ps
    return ps.take(np.flatnonzero(mask))


def subsample(ps, m, seed):
    """``m`` rows drawn uniformly without replacement, kept in dataset order.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts, so callers
    can derive independent streams as ``(seed, i)``.
    """
    m = int(m)
    if not 1 <= m <= ps.n_samples:
        raise DatasetError(f"cannot subsample {m} rows from {ps.n_samples}")
    if m == ps.n_samples:
        return ps
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(ps.n_samples, size=m, replace=False))
    return ps.take(idx)


def duplicate_mask(data):
    """Boolean mask of rows that exactly repeat an earlier row."""
    data = np.ascontiguousarray(data, dtype=np.float64)
    seen = {}
    dup = np.zeros(len(data), dtype=bool)
    for i, row in enumerate(data):
        row = row + 0.0  # folds -0.0 onto 0.0
        key = hashlib.blake2b(row.data, digest_size=16).digest()
        bucket = seen.setdefault(key, [])
        # a bucket holds more than one index only after a digest collision
        if any(np.array_equal(data[j], row) for j in bucket):
            dup[i] = True
        else:
            bucket.append(i)
    return dup


def deduplicate(ps):
    """Drop exact duplicate rows (first occurrence kept); returns ``(ps, removed)``."""
    dup = duplicate_mask(ps.data)
    removed = int(dup.sum())
    if removed == 0:
        return ps, 0
    return ps.take(np.flatnonzero(~dup)), removed
