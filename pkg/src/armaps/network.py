"""Declarative architectures, parameter init, forward trace and backprop."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import numerics as nx
from .errors import ShapeError
from .numerics import ConvParams, DenseParams, SwitchRecord

LAYER_KINDS = ("conv", "relu", "maxpool", "dense", "softmax")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_channels: int = 0  # conv
    kernel: int = 0  # conv
    stride: int = 1  # conv and maxpool
    padding: int = 0  # conv
    window: int = 0  # maxpool
    units: int = 0  # dense

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")


def conv(out_channels, kernel, stride=1, padding=None):
    return LayerSpec("conv", out_channels=out_channels, kernel=kernel, stride=stride,
                     padding=kernel // 2 if padding is None else padding)


def pool(window=2, stride=None):
    return LayerSpec("maxpool", window=window, stride=window if stride is None else stride)


def dense(units):
    return LayerSpec("dense", units=units)


RELU = LayerSpec("relu")
SOFTMAX = LayerSpec("softmax")


@dataclass
class NetworkSpec:
    layers: list
    input_shape: tuple = (1, 224, 224)
    class_count: int = 24
    name: str = "custom"
    last_conv: int = field(init=False)

    def __post_init__(self):
        self.layers = [l if isinstance(l, LayerSpec) else LayerSpec(**l) for l in self.layers]
        self.input_shape = tuple(int(v) for v in self.input_shape)
        kinds = [l.kind for l in self.layers]
        if kinds.count("softmax") != 1 or kinds[-1] != "softmax":
            raise ValueError("network must end in exactly one softmax layer")
        convs = [i for i, k in enumerate(kinds) if k == "conv"]
        if not convs:
            raise ValueError("network has no convolutional layer")
        self.last_conv = convs[-1]
        shapes = self.shapes()
        if shapes[-1] != (self.class_count,):
            raise ShapeError("network output", (self.class_count,), shapes[-1])

    def shapes(self):
        """Output shape of every layer; raises :class:`ShapeError` if they do not chain."""
        out = []
        shape = self.input_shape
        for i, l in enumerate(self.layers):
            if l.kind == "conv":
                if len(shape) != 3:
                    raise ShapeError(f"layer {i} (conv) input rank", 3, len(shape))
                c, h, w = shape
                ho = (h + 2 * l.padding - l.kernel) // l.stride + 1
                wo = (w + 2 * l.padding - l.kernel) // l.stride + 1
                if ho < 1 or wo < 1:
                    raise ShapeError(f"layer {i} (conv) output extent", ">= 1", (ho, wo))
                shape = (l.out_channels, ho, wo)
            elif l.kind == "maxpool":
                if len(shape) != 3:
                    raise ShapeError(f"layer {i} (maxpool) input rank", 3, len(shape))
                c, h, w = shape
                if l.window > min(h, w):
                    raise ShapeError(f"layer {i} (maxpool) window vs extent", f"<= {min(h, w)}", l.window)
                shape = (c, (h - l.window) // l.stride + 1, (w - l.window) // l.stride + 1)
            elif l.kind == "dense":
                shape = (l.units,)
            out.append(shape)
        return out

    def to_dict(self):
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "class_count": self.class_count,
            "layers": [{k: v for k, v in asdict(l).items() if v or k == "kind"} for l in self.layers],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(layers=[LayerSpec(**l) for l in d["layers"]], input_shape=tuple(d["input_shape"]),
                   class_count=d["class_count"], name=d.get("name", "custom"))

    def spec_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def preset(name: str, class_count: int = 24, input_size: int = 224, width: int | None = None) -> NetworkSpec:
    """Built-in architectures.

    ``shallow``: two conv(5x5)/pool blocks with 16 and 32 channels, a 128-unit
    hidden dense layer, then the classifier.  ``deeper``: five conv(3x3)/pool
    blocks starting at 32 channels and doubling (to 512), dense(256), classifier.
    ``width`` overrides the first block's channel count for desk-scale runs.
    """
    if name == "shallow":
        w = width or 16
        layers = [conv(w, 5), RELU, pool(2), conv(2 * w, 5), RELU, pool(2), dense(128), RELU]
    elif name in ("deeper", "deeper+aug"):
        w = width or 32
        layers = []
        for i in range(5):
            layers += [conv(w * 2 ** i, 3), RELU, pool(2)]
        layers += [dense(256), RELU]
    else:
        raise ValueError(f"unknown preset {name!r}; expected 'shallow' or 'deeper'")
    layers += [dense(class_count), SOFTMAX]
    return NetworkSpec(layers, (1, input_size, input_size), class_count, name="deeper" if name != "shallow" else name)


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> list:
    """He-style fan-in scaled uniform weights, zero biases; ``None`` for parameterless layers."""
    params = []
    shape = spec.input_shape
    for l, out_shape in zip(spec.layers, spec.shapes()):
        if l.kind == "conv":
            fan_in = shape[0] * l.kernel * l.kernel
            bound = np.sqrt(6.0 / fan_in)
            k = rng.uniform(-bound, bound, size=(l.out_channels, shape[0], l.kernel, l.kernel))
            params.append(ConvParams(k, np.zeros(l.out_channels), l.stride, l.padding))
        elif l.kind == "dense":
            fan_in = int(np.prod(shape))
            bound = np.sqrt(6.0 / fan_in)
            params.append(DenseParams(rng.uniform(-bound, bound, size=(l.units, fan_in)), np.zeros(l.units)))
        else:
            params.append(None)
        shape = out_shape
    return params


@dataclass
class ForwardTrace:
    """Every layer output (``outputs[i]`` is z_{i+1}), pool switches keyed by layer index, class probabilities."""

    input: np.ndarray
    outputs: list
    switches: dict
    probs: np.ndarray

    def layer_input(self, i):
        return self.input if i == 0 else self.outputs[i - 1]


def forward(spec: NetworkSpec, params: list, image) -> ForwardTrace:
    """Run the network on one ``(C,H,W)`` image or an ``(N,C,H,W)`` batch, recording everything."""
    x = np.asarray(image, dtype=nx.DTYPE)
    expected = tuple(spec.input_shape)
    if x.shape[-3:] != expected or x.ndim not in (3, 4):
        raise ShapeError("image shape", expected, x.shape)
    outputs, switches = [], {}
    h = x
    for i, (l, p) in enumerate(zip(spec.layers, params)):
        if l.kind == "conv":
            h = nx.conv2d_forward(h, p)
        elif l.kind == "relu":
            h = nx.relu_forward(h)
        elif l.kind == "maxpool":
            h, switches[i] = nx.maxpool_forward(h, l.window, l.stride)
        elif l.kind == "dense":
            h = nx.dense_forward(h, p)
        else:
            h = nx.softmax(h)
        outputs.append(h)
    return ForwardTrace(x, outputs, switches, h)


def backward(spec: NetworkSpec, params: list, trace: ForwardTrace, labels):
    """Mean cross-entropy loss of a batched trace and its parameter gradients.

    Returns ``(loss, grads)`` with ``grads`` aligned to ``params``: ``(dW, db)``
    tuples for layers with weights, ``None`` otherwise.
    """
    labels = np.asarray(labels)
    n = len(spec.layers)
    loss = nx.cross_entropy(trace.probs, labels)
    g = nx.softmax_ce_grad(trace.layer_input(n - 1), labels)
    grads = [None] * n
    for i in range(n - 2, -1, -1):
        l, p, x = spec.layers[i], params[i], trace.layer_input(i)
        if l.kind == "dense":
            dw, db, g = nx.dense_grad(x, p, g)
            grads[i] = (dw, db)
        elif l.kind == "relu":
            g = nx.relu_grad(x, g)
        elif l.kind == "maxpool":
            g = nx.maxpool_grad(g, trace.switches[i])
        elif l.kind == "conv":
            # the image gradient is never used; skip that transpose
            dk, db, g = nx.conv2d_grad(x, p, g, input_grad=i > 0)
            grads[i] = (dk, db)
    return loss, grads


def predict(spec, params, images, batch_size=64):
    """Class probabilities for a stack of images, computed in batches."""
    images = np.asarray(images, dtype=nx.DTYPE)
    out = []
    for s in range(0, len(images), batch_size):
        out.append(forward(spec, params, images[s : s + batch_size]).probs)
    return np.concatenate(out) if out else np.zeros((0, spec.class_count))


@dataclass
class Model:
    """A network with trained parameters and the preprocessing it was trained with."""

    spec: NetworkSpec
    params: list
    input_mean: float = 0.0
    class_names: list = field(default_factory=list)

    def prepare(self, images):
        return np.asarray(images, dtype=nx.DTYPE) - self.input_mean

    def trace(self, image) -> ForwardTrace:
        return forward(self.spec, self.params, self.prepare(image))

    def predict(self, images, batch_size=64):
        return predict(self.spec, self.params, self.prepare(images), batch_size)
