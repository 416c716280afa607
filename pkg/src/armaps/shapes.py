"""Seeded synthetic four-class shapes dataset (bar, cross, disk, ring) with object masks."""
from __future__ import annotations

import numpy as np

from .ingestion import Dataset
from .seeding import stream

CLASSES = ["bar", "cross", "disk", "ring"]


def _bar_mask(yy, xx, cy, cx, length, thick, angle):
    c, s = np.cos(angle), np.sin(angle)
    u = (xx - cx) * c + (yy - cy) * s
    v = -(xx - cx) * s + (yy - cy) * c
    return (np.abs(u) <= length / 2) & (np.abs(v) <= thick / 2)


def shape_mask(kind, size, rng):
    """Binary mask of one randomly placed, sized and oriented shape."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    r = rng.uniform(0.14, 0.3) * size
    margin = r + 2
    cy, cx = rng.uniform(margin, size - 1 - margin, size=2)
    angle = rng.uniform(0, np.pi)
    thick = rng.uniform(0.05, 0.09) * size
    if kind == "disk":
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    if kind == "ring":
        d = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
        return (d <= r) & (d >= r - thick)
    if kind == "bar":
        return _bar_mask(yy, xx, cy, cx, 2 * r, thick, angle)
    if kind == "cross":
        return _bar_mask(yy, xx, cy, cx, 2 * r, thick, angle) | _bar_mask(yy, xx, cy, cx, 2 * r, thick, angle + np.pi / 2)
    raise ValueError(f"unknown shape {kind!r}")


def render_sample(kind, size, rng, noise=0.08, distractors=2):
    """One image in [0, 1] plus its object mask."""
    mask = shape_mask(kind, size, rng)
    bg = rng.uniform(0.05, 0.3)
    fg = rng.uniform(0.6, 1.0)
    img = np.full((size, size), bg)
    img[mask] = fg
    for _ in range(rng.integers(0, distractors + 1)):
        y, x = rng.integers(0, size - 3, size=2)
        img[y : y + 3, x : x + 3] = rng.uniform(0.5, 1.0)
    img[mask] = fg
    img = img + noise * rng.standard_normal((size, size))
    return np.clip(img, 0.0, 1.0), mask


def make_shapes(n, size=64, seed=0, **kw):
    """Balanced dataset of ``n`` images (classes cycle) and a ``(n, size, size)`` mask stack."""
    rng = stream(seed, "data")
    images = np.zeros((n, 1, size, size))
    masks = np.zeros((n, size, size), dtype=bool)
    labels = np.arange(n) % len(CLASSES)
    labels = labels[rng.permutation(n)]
    for i, k in enumerate(labels):
        images[i, 0], masks[i] = render_sample(CLASSES[k], size, rng, **kw)
    return Dataset(images, labels, list(CLASSES)), masks


def shapes_split(n_train=800, n_test=200, size=64, seed=0, **kw):
    data, masks = make_shapes(n_train + n_test, size, seed, **kw)
    tr, te = np.arange(n_train), np.arange(n_train, n_train + n_test)
    return data.subset(tr), data.subset(te), masks[n_train:]
