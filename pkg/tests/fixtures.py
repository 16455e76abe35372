"""Synthetic MNIST-shaped IDX files for tests that must not touch the network."""

import gzip
from pathlib import Path

import numpy as np

from lightning_init.data import encode_idx_images, encode_idx_labels


def synthetic_digits(n, seed):
    """Learnable fake digits: class c lights up a block of rows."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, n)
    images = rng.integers(0, 40, (n, 28, 28))
    for i, c in enumerate(labels):
        images[i, 2 * c + 4:2 * c + 7, 4:24] = 255
    return images.astype(np.uint8), labels.astype(np.uint8)


def write_mnist_cache(root, n_train=200, n_test=50, compress=False, flat=False):
    folder = Path(root) if flat else Path(root) / "mnist"
    folder.mkdir(parents=True, exist_ok=True)
    for prefix, n, seed in (("train", n_train, 0), ("t10k", n_test, 1)):
        images, labels = synthetic_digits(n, seed)
        for suffix, payload in (("images", encode_idx_images(images)),
                                ("labels", encode_idx_labels(labels))):
            name = f"{prefix}-{suffix}"
            if compress:
                (folder / f"{name}.gz").write_bytes(gzip.compress(payload, mtime=0))
            else:
                (folder / name).write_bytes(payload)
    return Path(root)
