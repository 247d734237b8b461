"""MNIST ingestion, fixed binarization, batching and PNG sample grids."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError, DataIOError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (N, H, W) in [0, 1]
    labels: np.ndarray | None = None
    split: str = "train"

    def __len__(self):
        return len(self.images)

    def subset(self, n):
        if n is None or n >= len(self):
            return self
        labels = None if self.labels is None else self.labels[:n]
        return replace(self, images=self.images[:n], labels=labels)


def _open(path):
    path = Path(path)
    try:
        if path.suffix == ".gz":
            return gzip.open(path, "rb")
        return open(path, "rb")
    except OSError as exc:
        raise DataIOError(f"cannot open {path}: {exc}") from exc


def _read_bytes(path):
    with _open(path) as fh:
        try:
            return fh.read()
        except OSError as exc:
            raise DataIOError(f"cannot read {path}: {exc}") from exc


def _parse_idx(buf, magic, ndim, path):
    if len(buf) < 4:
        raise DataFormatError("file too short for an IDX header", path, offset=0)
    (got,) = struct.unpack(">I", buf[:4])
    if got != magic:
        raise DataFormatError(f"bad magic 0x{got:08x}, expected 0x{magic:08x}", path, offset=0)
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise DataFormatError(f"truncated header, need {header} bytes, have {len(buf)}", path, offset=len(buf))
    dims = struct.unpack(f">{ndim}I", buf[4:header])
    size = int(np.prod(dims))
    if len(buf) - header != size:
        raise DataFormatError(
            f"payload has {len(buf) - header} bytes, dimensions {dims} need {size}", path, offset=header
        )
    return np.frombuffer(buf, dtype=np.uint8, offset=header).reshape(dims)


def read_idx_images(path):
    """Raw ``uint8`` array ``(N, rows, cols)`` from an IDX3 file (optionally gzipped)."""
    return _parse_idx(_read_bytes(path), IDX_IMAGES_MAGIC, 3, path)


def read_idx_labels(path):
    return _parse_idx(_read_bytes(path), IDX_LABELS_MAGIC, 1, path)


def load_idx(images_path, labels_path=None, split="train"):
    """Parse IDX image (and label) files; pixels are scaled to [0, 1] by /255."""
    raw = read_idx_images(images_path)
    labels = None
    if labels_path is not None:
        labels = read_idx_labels(labels_path)
        if len(labels) != len(raw):
            raise DataFormatError(
                f"{len(labels)} labels for {len(raw)} images", labels_path, offset=4
            )
    return Dataset(raw.astype(np.float64) / 255.0, labels, split)


def idx_bytes(array, magic):
    array = np.asarray(array, dtype=np.uint8)
    return struct.pack(">I", magic) + struct.pack(f">{array.ndim}I", *array.shape) + array.tobytes()


def to_uint8(images):
    return np.clip(np.rint(np.asarray(images) * 255.0), 0, 255).astype(np.uint8)


def write_idx(path, dataset):
    """Serialize a Dataset back to IDX (images, plus a sibling label file if labels exist)."""
    path = Path(path)
    try:
        path.write_bytes(idx_bytes(to_uint8(dataset.images), IDX_IMAGES_MAGIC))
        if dataset.labels is not None:
            lp = path.with_name(path.name.replace("images-idx3", "labels-idx1"))
            if lp == path:
                lp = path.with_suffix(".labels")
            lp.write_bytes(idx_bytes(dataset.labels, IDX_LABELS_MAGIC))
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def load_mnist(root, split="train"):
    """Load the standard MNIST IDX files (raw or ``.gz``) from ``root``."""
    root = Path(root)
    names = MNIST_FILES[split]
    paths = []
    for name in names:
        for candidate in (root / name, root / f"{name}.gz"):
            if candidate.exists():
                paths.append(candidate)
                break
        else:
            raise DataIOError(f"MNIST file {name}[.gz] not found in {root}")
    return load_idx(paths[0], paths[1], split)


@lru_cache(maxsize=1)
def _sample_arrays():
    try:
        from mlxtend.data import mnist_data
    except ImportError as exc:
        raise DataIOError("the bundled MNIST sample needs the optional 'mlxtend' package") from exc
    x, y = mnist_data()
    x.flags.writeable = False
    y.flags.writeable = False
    return x, y


def load_mnist_sample(split="train", test_size=1000, seed=0):
    """Real MNIST digits bundled with ``mlxtend`` (5,000 images, 500 per class).

    A seeded shuffle splits them into ``5000 - test_size`` training and
    ``test_size`` test images. Only for environments without the full IDX files.
    """
    x, y = _sample_arrays()
    order = np.random.default_rng(seed).permutation(len(x))
    x = x[order].reshape(-1, 28, 28) / 255.0
    y = y[order].astype(np.uint8)
    if split == "train":
        return Dataset(x[test_size:], y[test_size:], "train")
    return Dataset(x[:test_size], y[:test_size], "test")


# -- binarization -------------------------------------------------------------


def load_binarized_text(path):
    """Images from a text file with one image per line, 784 space-separated 0/1 values."""
    rows = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                fields = line.split()
                if not fields:
                    continue
                if len(fields) != 784:
                    raise DataFormatError(f"expected 784 fields, found {len(fields)}", path, line=lineno)
                try:
                    values = [int(f) for f in fields]
                except ValueError:
                    raise DataFormatError("non-integer field", path, line=lineno) from None
                if any(v not in (0, 1) for v in values):
                    raise DataFormatError("fields must be 0 or 1", path, line=lineno)
                rows.append(values)
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    return np.asarray(rows, dtype=np.float64).reshape(-1, 28, 28)


def binarize(ds, mode="threshold", path=None):
    """Fixed binarization: ``pixel > 0.5`` or the published split read from ``path``."""
    if mode == "threshold":
        return replace(ds, images=(ds.images > 0.5).astype(np.float64))
    if mode == "precomputed":
        if path is None:
            raise ConfigError("precomputed binarization needs a text file path")
        return Dataset(load_binarized_text(path), None, ds.split)
    raise ConfigError(f"unknown binarization mode {mode!r}")


# -- batching -----------------------------------------------------------------


class BatchIterator:
    """Seeded shuffled mini-batches; each call to :meth:`epoch` is one full pass."""

    def __init__(self, n, batch_size, seed=0, shuffle=True):
        if batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {batch_size}")
        self.n = n
        self.batch_size = batch_size
        self.seed = seed
        self.shuffle = shuffle
        self.epoch_count = 0

    def __len__(self):
        return -(-self.n // self.batch_size)

    def epoch(self):
        if self.shuffle:
            order = np.random.default_rng([self.seed, self.epoch_count]).permutation(self.n)
        else:
            order = np.arange(self.n)
        self.epoch_count += 1
        for start in range(0, self.n, self.batch_size):
            yield order[start : start + self.batch_size]


# -- PNG output ---------------------------------------------------------------


def grid_image(images, cols, sep=2):
    """Tile images row-major into one uint8 array with ``sep``-pixel black gutters."""
    images = np.asarray(images, dtype=float)
    if images.ndim != 3 or len(images) == 0:
        raise ConfigError(f"expected a non-empty (N, H, W) stack, got shape {images.shape}")
    if cols < 1:
        raise ConfigError(f"cols must be positive, got {cols}")
    n, h, w = images.shape
    cols = min(cols, n)
    rows = -(-n // cols)
    out = np.zeros((rows * h + (rows - 1) * sep, cols * w + (cols - 1) * sep), dtype=np.uint8)
    tiles = to_uint8(images)
    for i in range(n):
        r, c = divmod(i, cols)
        out[r * (h + sep) : r * (h + sep) + h, c * (w + sep) : c * (w + sep) + w] = tiles[i]
    return out


def write_png(array, path):
    from PIL import Image

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.asarray(array, dtype=np.uint8), mode="L").save(path, format="PNG")
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def write_grid_png(images, cols, path, sep=2):
    """8-bit grayscale PNG of ``images`` tiled ``cols`` per row."""
    write_png(grid_image(images, cols, sep), path)


def read_png(path):
    """Grayscale image in [0, 1] (colour inputs are converted to luminance)."""
    from PIL import Image

    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
