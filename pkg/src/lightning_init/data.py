"""MNIST loading: IDX parsing, caching, download and scaling to [0, 1]."""

from __future__ import annotations

import gzip
import logging
import os
import struct
import urllib.error
import urllib.request
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .exceptions import (
    ChecksumError,
    DownloadError,
    InputError,
    LabelRangeError,
    MagicMismatchError,
    OfflineError,
    TrailingDataError,
    TruncatedDataError,
)

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

CACHE_ENV = "LIGHTNING_INIT_DATA"

# cache name -> (remote file name, uncompressed size in bytes)
MNIST_FILES = {
    "train-images": ("train-images-idx3-ubyte.gz", 47040016),
    "train-labels": ("train-labels-idx1-ubyte.gz", 60008),
    "t10k-images": ("t10k-images-idx3-ubyte.gz", 7840016),
    "t10k-labels": ("t10k-labels-idx1-ubyte.gz", 10008),
}

DEFAULT_MIRRORS = (
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
    "http://yann.lecun.com/exdb/mnist/",
)


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    split: Split = Split.TRAIN

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise InputError("image and label counts differ")

    def __len__(self):
        return int(self.labels.shape[0])

    def head(self, n: int | None) -> "Dataset":
        if n is None or n >= len(self):
            return self
        return Dataset(self.images[:n], self.labels[:n], self.split)


def _header(data: bytes, magic: int, n_dims: int) -> tuple[int, ...]:
    if len(data) < 4:
        raise TruncatedDataError("stream shorter than the IDX magic number")
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise MagicMismatchError(f"expected magic 0x{magic:08x}, found 0x{found:08x}")
    end = 4 + 4 * n_dims
    if len(data) < end:
        raise TruncatedDataError("stream ends inside the IDX header")
    return struct.unpack(f">{n_dims}I", data[4:end])


def _payload(data: bytes, offset: int, size: int) -> np.ndarray:
    if len(data) < offset + size:
        raise TruncatedDataError(f"expected {size} payload bytes, found {len(data) - offset}")
    if len(data) > offset + size:
        raise TrailingDataError(f"{len(data) - offset - size} bytes after the payload")
    return np.frombuffer(data, dtype=np.uint8, count=size, offset=offset)


def parse_idx_images(data: bytes) -> np.ndarray:
    """Decode an IDX3 ubyte image file into an ``(N, rows, cols)`` uint8 array."""
    n, rows, cols = _header(data, IMAGES_MAGIC, 3)
    return _payload(data, 16, n * rows * cols).reshape(n, rows, cols).copy()


def parse_idx_labels(data: bytes, n_classes: int = 10) -> np.ndarray:
    (n,) = _header(data, LABELS_MAGIC, 1)
    labels = _payload(data, 8, n).copy()
    if labels.size and labels.max() >= n_classes:
        raise LabelRangeError(f"label {int(labels.max())} outside 0..{n_classes - 1}")
    return labels


def encode_idx_images(images) -> bytes:
    images = np.asarray(images, dtype=np.uint8)
    return struct.pack(">4I", IMAGES_MAGIC, *images.shape) + images.tobytes()


def encode_idx_labels(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8).ravel()
    return struct.pack(">2I", LABELS_MAGIC, labels.size) + labels.tobytes()


def preprocess(raw_images, labels=None, split: Split = Split.TRAIN) -> Dataset:
    """Flatten and divide by 255 so pixels span [0, 1]."""
    raw = np.asarray(raw_images)
    images = raw.reshape(raw.shape[0], -1).astype(np.float64) / 255.0
    if labels is None:
        labels = np.zeros(raw.shape[0], dtype=np.int64)
    return Dataset(images, np.asarray(labels, dtype=np.int64), Split(split))


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "lightning-init"


def _cached_file(folder: Path, name: str) -> Path | None:
    for candidate in (folder / name, folder / f"{name}.gz"):
        if candidate.exists():
            return candidate
    return None


def _read(path: Path) -> bytes:
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _download(folder: Path, name: str, mirrors) -> Path:
    remote, expected = MNIST_FILES[name]
    folder.mkdir(parents=True, exist_ok=True)
    errors = []
    for base in mirrors:
        url = base.rstrip("/") + "/" + remote
        try:
            logger.info("downloading %s", url)
            with urllib.request.urlopen(url, timeout=60) as resp:
                payload = resp.read()
        except (urllib.error.URLError, OSError) as err:
            errors.append(f"{url}: {err}")
            continue
        size = len(gzip.decompress(payload)) if payload[:2] == b"\x1f\x8b" else len(payload)
        if size != expected:
            raise ChecksumError(f"{url}: {size} bytes after decompression, expected {expected}")
        target = folder / (f"{name}.gz" if payload[:2] == b"\x1f\x8b" else name)
        target.write_bytes(payload)
        return target
    raise DownloadError(f"could not download {remote}: " + "; ".join(errors))


def fetch_or_load(cache_dir=None, offline: bool = False, mirrors=DEFAULT_MIRRORS):
    """Return ``(train, test)`` MNIST datasets, downloading missing files unless offline.

    Files live in ``<cache>/mnist/`` as ``train-images``, ``train-labels``,
    ``t10k-images`` and ``t10k-labels``, raw IDX or gzip (``.gz`` suffix).
    """
    folder = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    folder = folder / "mnist"
    paths = {}
    for name in MNIST_FILES:
        path = _cached_file(folder, name)
        if path is None:
            if offline:
                raise OfflineError(f"{folder / name} missing and network access is disabled")
            path = _download(folder, name, mirrors)
        paths[name] = path

    out = []
    for prefix, split in (("train", Split.TRAIN), ("t10k", Split.TEST)):
        images = parse_idx_images(_read(paths[f"{prefix}-images"]))
        labels = parse_idx_labels(_read(paths[f"{prefix}-labels"]))
        if images.shape[0] != labels.shape[0]:
            raise ChecksumError(f"{prefix}: {images.shape[0]} images but {labels.shape[0]} labels")
        out.append(preprocess(images, labels, split))
    return out[0], out[1]
