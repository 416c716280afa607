"""Attentive response maps.

The units of the last convolutional layer are ranked by activation; each
selected unit's feature map is pushed back to input space through the chain of
transposed convolutions and switch unpoolings, and the per-unit maps are fused
per pixel into a dominant map.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .errors import ShapeError
from .network import ForwardTrace, Model, NetworkSpec

MODES = ("linear", "rectified")
METRICS = ("max", "sum")
DEFAULT_TOP_N = 25
FLOAT_MAP_MAGIC = b"ARMAP 1\n"


@dataclass(frozen=True)
class UnitScore:
    unit: int
    score: float


@dataclass
class AttentiveResponseMap:
    unit: int
    map: np.ndarray  # (H, W), input spatial shape
    score: float


@dataclass
class DominantMap:
    value_map: np.ndarray  # per-pixel max response
    unit_index_map: np.ndarray  # unit achieving it; ties -> lowest unit index


def feature_map(spec: NetworkSpec, trace: ForwardTrace, layer=None):
    """z_L of a single-image trace: the conv output, rectified if a ReLU follows it."""
    layer = spec.last_conv if layer is None else layer
    if not 0 <= layer < len(spec.layers) or spec.layers[layer].kind != "conv":
        raise IndexError(f"layer {layer} is not a convolutional layer")
    if layer + 1 < len(spec.layers) and spec.layers[layer + 1].kind == "relu":
        z = trace.outputs[layer + 1]
    else:
        z = trace.outputs[layer]
    if z.ndim != 3:
        raise ShapeError("trace feature map rank (single image)", 3, z.ndim)
    return z


def unit_scores(spec: NetworkSpec, trace: ForwardTrace, layer=None, metric="max"):
    """One score per channel of ``layer``: spatial max (default) or sum of its feature map."""
    z = feature_map(spec, trace, layer)
    if metric == "max":
        vals = z.reshape(z.shape[0], -1).max(axis=1)
    elif metric == "sum":
        vals = z.reshape(z.shape[0], -1).sum(axis=1)
    else:
        raise ValueError(f"unknown score metric {metric!r}")
    return [UnitScore(f, float(v)) for f, v in enumerate(vals)]


def top_n_units(scores, n):
    """Indices of the ``n`` best scores, best first; equal scores keep the lower index first."""
    if not 1 <= n <= len(scores):
        raise ValueError(f"n must lie in [1, {len(scores)}], got {n}")
    ranked = sorted(scores, key=lambda s: (-s.score, s.unit))
    return [s.unit for s in ranked[:n]]


def back_project(spec: NetworkSpec, params, trace: ForwardTrace, response, layer=None, mode="linear"):
    """Push a response living in the output space of conv ``layer`` down to the input.

    Conv layers apply their transpose (no bias), pool layers unpool through the
    recorded switches.  ReLU layers are the identity in ``linear`` mode and
    rectify the signal in ``rectified`` mode.  Returns a ``(C, H, W)`` array.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    layer = spec.last_conv if layer is None else layer
    if spec.layers[layer].kind != "conv":
        raise IndexError(f"layer {layer} is not a convolutional layer")
    shapes = spec.shapes()
    r = np.asarray(response, dtype=nx.DTYPE)
    if r.shape != shapes[layer]:
        raise ShapeError(f"response shape at layer {layer}", shapes[layer], r.shape)
    for i in range(layer, -1, -1):
        l = spec.layers[i]
        in_shape = spec.input_shape if i == 0 else shapes[i - 1]
        if l.kind == "conv":
            r = nx.conv2d_transpose(r, params[i], input_hw=in_shape[1:])
        elif l.kind == "maxpool":
            if i not in trace.switches:
                raise KeyError(f"trace has no switch record for pool layer {i}")
            r = nx.unpool(r, trace.switches[i])
        elif l.kind == "relu":
            if mode == "rectified":
                r = nx.relu_forward(r)
        else:
            raise ValueError(f"cannot back-project through a {l.kind} layer (layer {i})")
    return r


def attentive_response_map(spec: NetworkSpec, params, trace: ForwardTrace, unit: int, mode="linear",
                           peak_only=False, layer=None, score=None) -> AttentiveResponseMap:
    """Back-project channel ``unit`` of z_L alone (all other channels zeroed).

    ``peak_only`` keeps just the channel's maximum activation (first in
    row-major order).  Multi-channel inputs are summed to one plane.
    """
    layer = spec.last_conv if layer is None else layer
    z = feature_map(spec, trace, layer)
    if not 0 <= unit < z.shape[0]:
        raise IndexError(f"unit {unit} out of range for {z.shape[0]} channels")
    masked = np.zeros_like(z)
    if peak_only:
        k = int(np.argmax(z[unit]))
        masked[unit].flat[k] = z[unit].flat[k]
    else:
        masked[unit] = z[unit]
    r = back_project(spec, params, trace, masked, layer, mode)
    if score is None:
        score = float(z[unit].max())
    return AttentiveResponseMap(unit, r.sum(axis=0), float(score))


def dominant_map(maps) -> DominantMap:
    """Per-pixel max over the maps and the unit attaining it (lowest unit on ties)."""
    maps = list(maps)
    if not maps:
        raise ValueError("dominant_map needs at least one map")
    shape = maps[0].map.shape
    for m in maps:
        if m.map.shape != shape:
            raise ShapeError(f"map shape for unit {m.unit}", shape, m.map.shape)
    ordered = sorted(maps, key=lambda m: m.unit)
    stack = np.stack([m.map for m in ordered])
    arg = np.argmax(stack, axis=0)
    units = np.array([m.unit for m in ordered])
    return DominantMap(stack.max(axis=0), units[arg])


@dataclass
class Visualization:
    dominant: DominantMap
    maps: list  # AttentiveResponseMap, in selection order (best unit first)
    predicted: int
    probs: np.ndarray
    scores: list  # UnitScore for every unit of the layer


def visualize(model: Model, image, n=DEFAULT_TOP_N, mode="linear", peak_only=False, metric="max",
              layer=None) -> Visualization:
    """Forward an image, pick the top-``n`` units of the last conv layer, map and fuse them."""
    spec = model.spec
    trace = model.trace(image)
    scores = unit_scores(spec, trace, layer, metric)
    chosen = top_n_units(scores, n)
    maps = [attentive_response_map(spec, model.params, trace, f, mode, peak_only, layer, scores[f].score)
            for f in chosen]
    probs = trace.probs
    return Visualization(dominant_map(maps), maps, int(np.argmax(probs)), probs, scores)


def write_float_map(path, amap: AttentiveResponseMap):
    """Text header (magic line, then ``width height unit score``) followed by row-major little-endian float64."""
    h, w = amap.map.shape
    with open(path, "wb") as fh:
        fh.write(FLOAT_MAP_MAGIC)
        fh.write(f"{w} {h} {amap.unit} {amap.score!r}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(amap.map, dtype="<f8").tobytes())


def read_float_map(path) -> AttentiveResponseMap:
    with open(path, "rb") as fh:
        if fh.readline() != FLOAT_MAP_MAGIC:
            raise ValueError(f"{path}: not a float-map file")
        w, h, unit, score = fh.readline().decode("ascii").split()
        w, h = int(w), int(h)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != w * h:
        raise ValueError(f"{path}: expected {w * h} values, found {data.size}")
    return AttentiveResponseMap(int(unit), data.reshape(h, w).astype(np.float64), float(score))
