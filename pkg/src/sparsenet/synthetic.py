"""Procedural image-classification datasets.

Each class is a fixed smooth spatial template; samples are randomly
shifted, contrast-jittered, noisy renderings of their class template.
The task is learnable by a small CNN but noisy enough that accuracy
stays off the ceiling, which keeps regularization and ensembling
effects visible at desk scale. Generation is deterministic per seed.

`make_image_classes` produces float images in [0, 1]; the uint8 variants
quantize them so they can round-trip through the on-disk loaders.
"""

import numpy as np

from .datasets import Dataset
from .seeding import rng_for


def _smooth_templates(rng, class_count, channels, h, w, cells=4):
    """Low-resolution random fields upsampled to (h, w), one per class."""
    low = rng.standard_normal((class_count, channels, cells, cells))
    reps_h, reps_w = -(-h // cells), -(-w // cells)
    full = np.repeat(np.repeat(low, reps_h, axis=2), reps_w, axis=3)[:, :, :h, :w]
    # crude separable box blur to remove the block edges
    for axis in (2, 3):
        full = (np.roll(full, 1, axis=axis) + full + np.roll(full, -1, axis=axis)) / 3.0
    full /= np.abs(full).max(axis=(1, 2, 3), keepdims=True)
    return full


def make_image_classes(
    n: int,
    shape=(3, 32, 32),
    class_count: int = 10,
    noise: float = 0.8,
    max_shift: int = 3,
    seed: int = 0,
) -> Dataset:
    """A class-template task with `n` examples of the given image shape."""
    channels, h, w = shape
    rng = rng_for(seed, "synthetic", n, channels, h, w, class_count)
    templates = _smooth_templates(rng, class_count, channels, h, w)
    labels = rng.integers(0, class_count, size=n)
    shifts = rng.integers(-max_shift, max_shift + 1, size=(n, 2))
    contrast = rng.uniform(0.7, 1.3, size=n)
    images = np.empty((n, channels, h, w), dtype=np.float32)
    for i in range(n):
        img = np.roll(templates[labels[i]], tuple(shifts[i]), axis=(1, 2))
        img = contrast[i] * img + noise * rng.standard_normal((channels, h, w))
        images[i] = img
    # squash into [0, 1] like the file loaders produce
    images = 0.5 + images / (2.0 * max(1.0, np.abs(images).max()))
    return Dataset(
        images=np.clip(images, 0.0, 1.0).astype(np.float32),
        labels=labels.astype(np.int64),
        class_count=class_count,
    )


def as_uint8(d: Dataset) -> np.ndarray:
    """Quantize a [0, 1] float dataset to uint8 pixels."""
    return np.clip(np.rint(d.images * 255.0), 0, 255).astype(np.uint8)


def make_synthetic_pair(
    n_train: int,
    n_test: int,
    shape=(3, 32, 32),
    class_count: int = 10,
    noise: float = 0.8,
    max_shift: int = 3,
    seed: int = 0,
):
    """Train/test datasets drawn from one template family.

    Both splits come from a single generated pool so they share templates
    but no examples.
    """
    pool = make_image_classes(
        n_train + n_test, shape=shape, class_count=class_count, noise=noise,
        max_shift=max_shift, seed=seed,
    )
    idx = np.arange(len(pool))
    return pool.take(idx[:n_train]), pool.take(idx[n_train:])
