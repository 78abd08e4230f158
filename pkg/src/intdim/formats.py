"""Readers and writers for the on-disk container formats.

Every reader returns plain numpy arrays; assembling a :class:`~intdim.dataset.PointSet`
(scaling, flattening, validation) is the job of :func:`intdim.dataset.load`.

Raw-tensor layout
-----------------
A raw tensor is a pair of files: a binary payload of little-endian floats in
row-major order, and a sidecar text header of ``key = value`` lines. Required
keys are ``n``, ``N`` and ``data`` (payload path, relative to the header).
Optional keys: ``labels`` (little-endian int32 payload), ``dtype`` (``float32``
by default, ``float64`` for lossless storage), and any number of free-form
provenance keys which are preserved on read.
"""

import gzip
import os
import struct
from pathlib import Path

import numpy as np

from .exceptions import FormatError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

CIFAR_RECORD = 3073
CIFAR_SIDE = 32
CIFAR_TRAIN_BATCHES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))

RAW_DTYPES = {"float32": "<f4", "float64": "<f8"}
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff", ".webp"}


def _open_maybe_gzip(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


# -- IDX ----------------------------------------------------------------------


def read_idx(path, expected_magic=None):
    """Read a big-endian uint8 IDX tensor (MNIST layout). Gzipped files are accepted."""
    with _open_maybe_gzip(path) as fh:
        payload = fh.read()
    if len(payload) < 4:
        raise FormatError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", payload[:4])
    if magic >> 8 != 0x08:
        raise FormatError(f"{path}: bad IDX magic number 0x{magic:08x} (expected uint8 tensor)")
    if expected_magic is not None and magic != expected_magic:
        raise FormatError(f"{path}: IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    if ndim == 0:
        raise FormatError(f"{path}: IDX tensor with zero dimensions")
    header_len = 4 + 4 * ndim
    if len(payload) < header_len:
        raise FormatError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", payload[4:header_len])
    size = int(np.prod(dims, dtype=np.int64))
    body = payload[header_len:]
    if len(body) < size:
        raise FormatError(f"{path}: truncated IDX payload ({len(body)} of {size} bytes)")
    if len(body) > size:
        raise FormatError(f"{path}: {len(body) - size} trailing bytes after IDX payload")
    return np.frombuffer(body, dtype=np.uint8).reshape(dims)


def write_idx(path, array):
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    header = struct.pack(f">I{array.ndim}I", magic, *array.shape)
    Path(path).write_bytes(header + array.tobytes())


def _labels_path_for(images_path):
    images_path = Path(images_path)
    name = images_path.name
    for a, b in (("images-idx3", "labels-idx1"), ("images.idx3", "labels.idx1"), ("images", "labels")):
        if a in name:
            candidate = images_path.with_name(name.replace(a, b))
            if candidate.exists():
                return candidate
    return None


def resolve_idx_paths(path):
    """Map a directory or an images file onto ``(images_path, labels_path or None)``.

    A directory resolves to the MNIST training split.
    """
    path = Path(path)
    if path.is_dir():
        for stem in ("train-images-idx3-ubyte", "train-images.idx3-ubyte"):
            for suffix in ("", ".gz"):
                candidate = path / f"{stem}{suffix}"
                if candidate.exists():
                    return candidate, _labels_path_for(candidate)
        raise FormatError(f"{path}: no train-images-idx3-ubyte file in directory")
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    return path, _labels_path_for(path)


def read_idx_dataset(path):
    """Return ``(images, labels)``; images are (n, rows, cols[, channels]) uint8."""
    images_path, labels_path = resolve_idx_paths(path)
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = None
    if labels_path is not None:
        labels = read_idx(labels_path, IDX_LABELS_MAGIC).astype(np.int64)
        if len(labels) != len(images):
            raise FormatError(
                f"{labels_path}: {len(labels)} labels for {len(images)} images"
            )
    return images, labels


# -- CIFAR-10 binary ----------------------------------------------------------


def read_cifar10_batch(path):
    """Read one CIFAR-10 binary batch.

    Returns ``(images, labels)`` with images as (n, 32, 32, 3) uint8, i.e. the
    channel-planar records converted to channel-interleaved pixels.
    """
    raw = Path(path).read_bytes()
    if len(raw) == 0 or len(raw) % CIFAR_RECORD:
        raise FormatError(
            f"{path}: size {len(raw)} is not a positive multiple of the {CIFAR_RECORD}-byte record"
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0].astype(np.int64)
    if labels.max() > 9:
        raise FormatError(f"{path}: label byte {labels.max()} out of range 0-9")
    planar = records[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE)
    return np.ascontiguousarray(planar.transpose(0, 2, 3, 1)), labels


def write_cifar10_batch(path, images, labels):
    images = np.asarray(images, dtype=np.uint8).reshape(-1, CIFAR_SIDE, CIFAR_SIDE, 3)
    records = np.empty((len(images), CIFAR_RECORD), dtype=np.uint8)
    records[:, 0] = labels
    records[:, 1:] = images.transpose(0, 3, 1, 2).reshape(len(images), -1)
    Path(path).write_bytes(records.tobytes())


def resolve_cifar_paths(path):
    """A directory resolves to the five training batches; a file is read alone."""
    path = Path(path)
    if path.is_dir():
        batches = [path / name for name in CIFAR_TRAIN_BATCHES]
        missing = [b.name for b in batches if not b.exists()]
        if missing:
            raise FormatError(f"{path}: missing CIFAR-10 batches {missing}")
        return batches
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    return [path]


def read_cifar10(path):
    parts = [read_cifar10_batch(p) for p in resolve_cifar_paths(path)]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


# -- CSV ------------------------------------------------------------------------


def read_csv(path, label_column=False):
    """One point per line, comma-separated decimals.

    With ``label_column`` the final column is split off as integer labels.
    """
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise FormatError(f"{path}:{lineno}: expected {width} fields, got {len(fields)}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise FormatError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=np.float64)
    if not label_column:
        return table, None
    if table.shape[1] < 2:
        raise FormatError(f"{path}: label column requested but only one column present")
    labels = table[:, -1]
    if not np.all(labels == np.round(labels)):
        raise FormatError(f"{path}: label column contains non-integer values")
    return table[:, :-1], labels.astype(np.int64)


# -- raw tensor ---------------------------------------------------------------


def read_header(path):
    """Parse a ``key = value`` header file into an ordered dict of strings."""
    header = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FormatError(f"{path}: no such header file") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{path}:{lineno}: expected 'key = value'")
        header[key.strip()] = value.strip()
    return header


def write_header(path, header):
    lines = [f"{key} = {value}" for key, value in header.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _payload_path(header_path, name):
    name = Path(name)
    return name if name.is_absolute() else Path(header_path).parent / name


def read_raw_tensor(header_path):
    """Return ``(data, labels or None, header)``; data is widened to float64."""
    header = read_header(header_path)
    for key in ("n", "N", "data"):
        if key not in header:
            raise FormatError(f"{header_path}: header lacks required key {key!r}")
    try:
        n, dim = int(header["n"]), int(header["N"])
    except ValueError:
        raise FormatError(f"{header_path}: n and N must be integers") from None
    dtype = header.get("dtype", "float32")
    if dtype not in RAW_DTYPES:
        raise FormatError(f"{header_path}: unsupported dtype {dtype!r}")
    payload = _payload_path(header_path, header["data"])
    try:
        raw = payload.read_bytes()
    except FileNotFoundError:
        raise FormatError(f"{payload}: no such payload file") from None
    itemsize = np.dtype(RAW_DTYPES[dtype]).itemsize
    if len(raw) != n * dim * itemsize:
        raise FormatError(
            f"{payload}: {len(raw)} bytes, header promises {n}x{dim} {dtype} = {n * dim * itemsize}"
        )
    data = np.frombuffer(raw, dtype=RAW_DTYPES[dtype]).reshape(n, dim).astype(np.float64)
    labels = None
    if header.get("labels"):
        lpath = _payload_path(header_path, header["labels"])
        try:
            lraw = lpath.read_bytes()
        except FileNotFoundError:
            raise FormatError(f"{lpath}: no such label file") from None
        if len(lraw) != 4 * n:
            raise FormatError(f"{lpath}: {len(lraw)} bytes, expected {4 * n} for {n} int32 labels")
        labels = np.frombuffer(lraw, dtype="<i4").astype(np.int64)
    return data, labels, header


def write_raw_tensor(header_path, data, labels=None, *, dtype="float32", extra=None):
    """Write ``data`` (and labels) next to ``header_path``; returns the header dict."""
    if dtype not in RAW_DTYPES:
        raise FormatError(f"unsupported dtype {dtype!r}")
    header_path = Path(header_path)
    data = np.asarray(data)
    if data.ndim != 2:
        raise FormatError("raw tensors are 2-D")
    stem = header_path.name[: -len(".hdr")] if header_path.name.endswith(".hdr") else header_path.name
    data_name = f"{stem}.bin"
    header = {"n": str(data.shape[0]), "N": str(data.shape[1]), "dtype": dtype, "data": data_name}
    header_path.parent.mkdir(parents=True, exist_ok=True)
    (header_path.parent / data_name).write_bytes(
        np.ascontiguousarray(data, dtype=RAW_DTYPES[dtype]).tobytes()
    )
    if labels is not None:
        label_name = f"{stem}.labels"
        (header_path.parent / label_name).write_bytes(
            np.ascontiguousarray(labels, dtype="<i4").tobytes()
        )
        header["labels"] = label_name
    for key, value in (extra or {}).items():
        if key in header:
            raise FormatError(f"extra header key {key!r} collides with a reserved key")
        header[key] = str(value)
    write_header(header_path, header)
    return header


# -- image directory ----------------------------------------------------------


def read_image_directory(path):
    """Decode every image file in ``path`` (sorted by name).

    Images decode to 8-bit; grayscale stays single-channel, everything else is
    converted to RGB. Returns ``(images, names)`` with images (n, h, w, c).
    """
    from PIL import Image

    path = Path(path)
    if not path.is_dir():
        raise FormatError(f"{path}: not a directory")
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise FormatError(f"{path}: no image files")
    arrays = []
    shape = None
    for f in files:
        with Image.open(f) as im:
            mode = "L" if im.mode in ("1", "L", "I;16", "I", "F") else "RGB"
            arr = np.asarray(im.convert(mode), dtype=np.uint8)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise FormatError(f"{f}: shape {arr.shape} differs from {shape} of {files[0].name}")
        arrays.append(arr)
    return np.stack(arrays), [os.fspath(f.name) for f in files]
