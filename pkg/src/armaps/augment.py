"""Random label-preserving geometric augmentation for grayscale images."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import bilinear_sample


@dataclass
class AugmentConfig:
    """Sampling ranges; each transform draws uniformly from its ``(lo, hi)`` range."""

    crop: tuple = (0.85, 1.0)  # side fraction of the random crop
    rotation: tuple = (-15.0, 15.0)  # degrees
    translation: tuple = (-10.0, 10.0)  # pixels, x and y drawn independently
    shear: tuple = (-10.0, 10.0)  # degrees
    stretch: tuple = (0.9, 1.1)  # per-axis scale, x and y drawn independently
    flip_prob: float = 0.5

    def __post_init__(self):
        for name in ("crop", "rotation", "translation", "shear", "stretch"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is not ordered: {(lo, hi)}")
            setattr(self, name, (float(lo), float(hi)))
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip_prob must lie in [0, 1], got {self.flip_prob}")
        if self.crop[0] <= 0 or self.crop[1] > 1:
            raise ValueError(f"crop fractions must lie in (0, 1], got {self.crop}")
        if self.stretch[0] <= 0:
            raise ValueError(f"stretch factors must be positive, got {self.stretch}")

    @classmethod
    def identity(cls):
        return cls((1.0, 1.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 1.0), 0.0)


def _draw(rng, lo_hi):
    lo, hi = lo_hi
    return lo + (hi - lo) * rng.random()


def sample_transform(cfg: AugmentConfig, rng: np.random.Generator, shape):
    """Draw one transform: ``(matrix, offset, flip)`` mapping centred output coords to input coords."""
    h, w = shape
    c = _draw(rng, cfg.crop)
    theta = np.deg2rad(_draw(rng, cfg.rotation))
    shear = np.tan(np.deg2rad(_draw(rng, cfg.shear)))
    sx, sy = _draw(rng, cfg.stretch), _draw(rng, cfg.stretch)
    tx, ty = _draw(rng, cfg.translation), _draw(rng, cfg.translation)
    # crop window centre, uniform over positions that keep the window inside
    cy = (2 * rng.random() - 1) * (1 - c) * h / 2
    cx = (2 * rng.random() - 1) * (1 - c) * w / 2
    flip = rng.random() < cfg.flip_prob

    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    sh = np.array([[1.0, 0.0], [shear, 1.0]])  # (y, x): x += shear * y
    st = np.diag([sy, sx])
    fwd = rot @ sh @ st
    inv = c * np.linalg.inv(fwd)
    offset = np.array([cy, cx]) - inv @ np.array([ty, tx])
    return inv, offset, flip


def augment(image, cfg: AugmentConfig, rng: np.random.Generator):
    """Apply a random crop/rotate/translate/shear/stretch composition, then an optional mirror.

    Accepts ``(H, W)`` or ``(1, H, W)``; the output has the input's shape.
    Samples falling outside the source image are zero.
    """
    img = np.asarray(image, dtype=np.float64)
    plane = img.reshape(img.shape[-2:])
    h, w = plane.shape
    inv, offset, flip = sample_transform(cfg, rng, (h, w))
    ch, cw = (h - 1) / 2, (w - 1) / 2
    yy, xx = np.meshgrid(np.arange(h) - ch, np.arange(w) - cw, indexing="ij")
    src_y = inv[0, 0] * yy + inv[0, 1] * xx + offset[0] + ch
    src_x = inv[1, 0] * yy + inv[1, 1] * xx + offset[1] + cw
    out = bilinear_sample(plane, src_y, src_x, outside="zero")
    if flip:
        out = out[:, ::-1]
    return np.ascontiguousarray(out).reshape(img.shape)
