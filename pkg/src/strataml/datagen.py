"""Synthetic classification datasets for experiments and tests.

Two generators: Gaussian blobs (configurable spread/overlap) and an XOR-style
interaction problem (optionally rotated so the structure is not axis-aligned).
Both support irrelevant extra features and label noise.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .data import Dataset
from .rng import RngStream

__all__ = ["make_blobs", "make_xor", "make_dataset"]


def _apply_label_noise(labels: np.ndarray, n_classes: int, noise: float, gen) -> np.ndarray:
    if noise <= 0.0:
        return labels
    n_flip = int(round(noise * labels.size))
    if n_flip == 0:
        return labels
    rows = gen.choice(labels.size, size=n_flip, replace=False)
    shifted = (labels[rows] + 1 + gen.integers(0, n_classes - 1, size=n_flip)) % n_classes
    out = labels.copy()
    out[rows] = shifted
    return out


def _balanced_labels(n: int, n_classes: int) -> np.ndarray:
    base = n // n_classes
    counts = [base + (1 if c < n % n_classes else 0) for c in range(n_classes)]
    return np.repeat(np.arange(n_classes), counts)


def make_blobs(
    n: int,
    n_features: int,
    n_classes: int,
    rng: RngStream,
    *,
    informative: Optional[int] = None,
    cluster_std: float = 1.0,
    center_scale: float = 3.0,
    label_noise: float = 0.0,
    name: str = "blobs",
) -> Dataset:
    """Isotropic Gaussian clusters, one per class, on `informative` dimensions;
    remaining features are standard-normal noise."""
    gen = rng.generator()
    informative = n_features if informative is None else min(informative, n_features)
    labels = _balanced_labels(n, n_classes)
    centers = gen.normal(0.0, center_scale, size=(n_classes, informative))
    X = gen.normal(0.0, 1.0, size=(n, n_features))
    X[:, :informative] = X[:, :informative] * cluster_std + centers[labels]
    labels = _apply_label_noise(labels, n_classes, label_noise, gen)
    order = gen.permutation(n)
    return Dataset(X[order], labels[order], name=name)


def make_xor(
    n: int,
    n_features: int,
    rng: RngStream,
    *,
    rotation: float = 0.0,
    noise_scale: float = 0.3,
    label_noise: float = 0.0,
    name: str = "xor",
) -> Dataset:
    """Two-class XOR interaction on two latent coordinates in [-1, 1], rotated
    by `rotation` radians into the first two features; extra features are
    N(0, noise_scale) distractors."""
    if n_features < 2:
        raise ValueError("xor needs at least 2 features")
    gen = rng.generator()
    u = gen.uniform(-1.0, 1.0, size=(n, 2))
    labels = ((u[:, 0] > 0.0) ^ (u[:, 1] > 0.0)).astype(np.int64)
    c, s = math.cos(rotation), math.sin(rotation)
    X = gen.normal(0.0, noise_scale, size=(n, n_features))
    X[:, 0] = c * u[:, 0] - s * u[:, 1]
    X[:, 1] = s * u[:, 0] + c * u[:, 1]
    labels = _apply_label_noise(labels, 2, label_noise, gen)
    return Dataset(X, labels, name=name)


def make_dataset(kind: str, n: int, n_features: int, n_classes: int, rng: RngStream, **kwargs):
    """Dispatch for the command line; `kind` is 'blobs' or 'xor'."""
    if kind == "blobs":
        return make_blobs(n, n_features, n_classes, rng, **kwargs)
    if kind == "xor":
        if n_classes != 2:
            raise ValueError("xor datasets are binary; use --classes 2")
        return make_xor(n, n_features, rng, **kwargs)
    raise ValueError(f"unknown dataset kind {kind!r}")
