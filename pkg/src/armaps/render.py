"""Overlay rendering of response maps and PNG output.

The colormap is a piecewise-linear gradient through five fixed RGB anchors:

    0.00  (0.0, 0.0, 0.5)  dark blue
    0.25  (0.0, 1.0, 1.0)  cyan
    0.50  (0.0, 1.0, 0.0)  green
    0.75  (1.0, 1.0, 0.0)  yellow
    1.00  (1.0, 0.0, 0.0)  red
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

COLORMAP_STOPS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
COLORMAP_RGB = np.array([
    [0.0, 0.0, 0.5],
    [0.0, 1.0, 1.0],
    [0.0, 1.0, 0.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.0, 0.0],
])
GUTTER = 2


@dataclass
class OverlayConfig:
    alpha: float = 0.6
    colormap: str = "attentive5"
    clamp_negative: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.colormap != "attentive5":
            raise ValueError(f"unknown colormap {self.colormap!r}")


def colormap(m):
    """Map values in [0, 1] to RGB, shape ``m.shape + (3,)``."""
    m = np.clip(np.asarray(m, dtype=np.float64), 0.0, 1.0)
    return np.stack([np.interp(m, COLORMAP_STOPS, COLORMAP_RGB[:, c]) for c in range(3)], axis=-1)


def normalize_map(m, clamp_negative=True):
    """Clamp negatives (optionally) then min-max rescale to [0, 1]; a constant map becomes zeros."""
    m = np.asarray(m, dtype=np.float64)
    if clamp_negative:
        m = np.maximum(m, 0.0)
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.zeros_like(m)
    return (m - lo) / (hi - lo)


def _gray(image):
    g = np.asarray(image, dtype=np.float64)
    if g.ndim == 3 and g.shape[0] == 1:
        g = g[0]
    if g.ndim != 2:
        raise ShapeError("grayscale image rank", 2, g.ndim)
    return g


def overlay(image, map01, cfg: OverlayConfig | None = None):
    """Blend ``(1 - a*m) * gray + a*m * colormap(m)`` per pixel; returns ``(H, W, 3)`` in [0, 1]."""
    cfg = cfg or OverlayConfig()
    g = _gray(image)
    m = np.asarray(map01, dtype=np.float64)
    if m.shape != g.shape:
        raise ShapeError("map vs image shape", g.shape, m.shape)
    wgt = (cfg.alpha * m)[..., None]
    out = (1.0 - wgt) * g[..., None] + wgt * colormap(m)
    return np.clip(out, 0.0, 1.0)


def panel(tiles, columns):
    """Tile equally sized RGB images row-major with 2-pixel black gutters; empty slots stay black."""
    tiles = [np.asarray(t, dtype=np.float64) for t in tiles]
    if not tiles:
        raise ValueError("panel needs at least one tile")
    if columns < 1:
        raise ValueError(f"columns must be >= 1, got {columns}")
    h, w = tiles[0].shape[:2]
    for t in tiles:
        if t.shape != (h, w, 3):
            raise ShapeError("panel tile shape", (h, w, 3), t.shape)
    cols = min(columns, len(tiles))
    rows = -(-len(tiles) // cols)
    out = np.zeros((rows * h + (rows - 1) * GUTTER, cols * w + (cols - 1) * GUTTER, 3))
    for k, t in enumerate(tiles):
        r, c = divmod(k, cols)
        y, x = r * (h + GUTTER), c * (w + GUTTER)
        out[y : y + h, x : x + w] = t
    return out


def unit_panel(image, maps, columns, cfg: OverlayConfig | None = None):
    """Per-unit overlays of ``AttentiveResponseMap``s, tiled."""
    cfg = cfg or OverlayConfig()
    return panel([overlay(image, normalize_map(m.map, cfg.clamp_negative), cfg) for m in maps], columns)


def quantize(rgb):
    """[0, 1] floats to uint8, rounding half up."""
    v = np.asarray(rgb, dtype=np.float64)
    return np.clip(np.floor(v * 255.0 + 0.5), 0, 255).astype(np.uint8)


def _chunk(tag, data):
    body = tag + data
    return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)


def encode_png(rgb) -> bytes:
    """8-bit RGB PNG bytes.  Float input is quantized; uint8 input is written as is."""
    a = np.asarray(rgb)
    if a.dtype != np.uint8:
        a = quantize(a)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ShapeError("RGB image shape", "(H, W, 3)", a.shape)
    h, w = a.shape[:2]
    raw = b"".join(b"\x00" + a[y].tobytes() for y in range(h))
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    return b"\x89PNG\r\n\x1a\n" + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", zlib.compress(raw, 9)) + _chunk(b"IEND", b"")


def write_image(rgb, path):
    data = encode_png(rgb)
    with open(path, "wb") as fh:
        fh.write(data)


def read_image(path):
    """Decode a PNG to ``(H, W, 3)`` uint8."""
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))
