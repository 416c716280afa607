"""Float64 tensor kernels: convolution and its exact transpose, switch pooling,
dense layers, softmax/cross-entropy, and the matching backward passes.

Feature maps are numpy arrays laid out ``(C, H, W)``.  Every function here also
accepts a leading batch axis ``(N, C, H, W)``; the training loop relies on that.
Convolution is cross-correlation (no kernel flip).  All reductions run in a fixed
order so repeated calls are bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import LabelError, ShapeError, SwitchError

DTYPE = np.float64


@dataclass
class ConvParams:
    kernel: np.ndarray  # (out_channels, in_channels, kH, kW)
    bias: np.ndarray  # (out_channels,)
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=DTYPE)
        self.bias = np.asarray(self.bias, dtype=DTYPE)
        if self.kernel.ndim != 4:
            raise ShapeError("kernel rank", 4, self.kernel.ndim)
        if self.bias.shape != (self.kernel.shape[0],):
            raise ShapeError("bias length", (self.kernel.shape[0],), self.bias.shape)
        if self.stride < 1 or self.padding < 0:
            raise ValueError(f"stride must be >= 1 and padding >= 0, got {self.stride}, {self.padding}")

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        kh, kw = self.kernel.shape[2:]
        ho = (h + 2 * self.padding - kh) // self.stride + 1
        wo = (w + 2 * self.padding - kw) // self.stride + 1
        if ho < 1 or wo < 1:
            raise ShapeError("convolution output extent (H, W)", ">= 1", (ho, wo))
        return ho, wo


@dataclass
class DenseParams:
    weight: np.ndarray  # (out_features, in_features)
    bias: np.ndarray  # (out_features,)

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=DTYPE)
        self.bias = np.asarray(self.bias, dtype=DTYPE)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError("dense weight/bias", "(out, in)/(out,)", (self.weight.shape, self.bias.shape))


@dataclass
class SwitchRecord:
    """Argmax positions recorded by a max-pool forward pass.

    ``indices`` has the pooled shape (with batch axis if the forward was
    batched) and holds, per pooled cell, the flat row-major index into the
    single-sample ``(C, H, W)`` pre-pool tensor.
    """

    input_shape: tuple  # (C, H, W)
    pooled_shape: tuple  # (C, Ho, Wo)
    window: tuple  # (kH, kW)
    stride: int
    indices: np.ndarray


def _batched(x):
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError("feature map rank", "3 (C,H,W) or 4 (N,C,H,W)", x.ndim)


def _pad(x, p):
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def _im2col(x, kh, kw, stride, ho, wo):
    # (N, C, H, W) -> (C*kh*kw, N*Ho*Wo), one contiguous slab per kernel tap
    n, c = x.shape[:2]
    cols = np.empty((c, kh, kw, n, ho, wo), dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = x[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride].transpose(1, 0, 2, 3)
    return cols.reshape(c * kh * kw, n * ho * wo)


def _col2im(cols, shape, kh, kw, stride, padding, ho, wo):
    # exact adjoint of _im2col: scatter-add patches, fixed (i, j) order
    n, c, h, w = shape
    cols = cols.reshape(c, kh, kw, n, ho, wo)
    out = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols[:, i, j].transpose(1, 0, 2, 3)
    if padding:
        out = out[:, :, padding:-padding, padding:-padding]
    return out


def _channels_first(y):
    # (N, O, Ho, Wo) -> (O, N*Ho*Wo)
    return y.transpose(1, 0, 2, 3).reshape(y.shape[1], -1)


def _check_conv_input(x, params):
    if x.shape[1] != params.in_channels:
        raise ShapeError("input channels vs kernel in_channels", params.in_channels, x.shape[1])
    return params.output_hw(x.shape[2], x.shape[3])


def conv2d_forward(x, params: ConvParams):
    """Cross-correlation with bias. ``(C,H,W) -> (O,Ho,Wo)``."""
    x, single = _batched(x)
    ho, wo = _check_conv_input(x, params)
    o = params.out_channels
    kh, kw = params.kernel.shape[2:]
    cols = _im2col(_pad(x, params.padding), kh, kw, params.stride, ho, wo)
    y = params.kernel.reshape(o, -1) @ cols + params.bias[:, None]
    y = np.ascontiguousarray(y.reshape(o, x.shape[0], ho, wo).transpose(1, 0, 2, 3))
    return y[0] if single else y


def conv2d_transpose(response, params: ConvParams, input_hw=None):
    """Fractionally strided convolution: the linear adjoint of :func:`conv2d_forward`.

    Bias is not applied.  When the forward pass discarded trailing rows/columns
    (stride not dividing the padded extent), pass ``input_hw`` to recover the
    original spatial extent; otherwise the minimal consistent extent is used.
    """
    y, single = _batched(response)
    o, ho, wo = y.shape[1:]
    if o != params.out_channels:
        raise ShapeError("response channels vs kernel out_channels", params.out_channels, o)
    kh, kw = params.kernel.shape[2:]
    s, p = params.stride, params.padding
    if input_hw is None:
        input_hw = (s * (ho - 1) + kh - 2 * p, s * (wo - 1) + kw - 2 * p)
    h, w = input_hw
    if params.output_hw(h, w) != (ho, wo):
        raise ShapeError("response extent for input extent %s" % (tuple(input_hw),), params.output_hw(h, w), (ho, wo))
    c = params.in_channels
    cols = params.kernel.reshape(o, -1).T @ _channels_first(y)
    # rows past the last window never feed an output and stay zero
    xt = _col2im(cols, (y.shape[0], c, h, w), kh, kw, s, p, ho, wo)
    return xt[0] if single else xt


def conv2d_grad(x, params: ConvParams, upstream, input_grad=True):
    """Gradients of a conv layer: ``(grad_kernel, grad_bias, grad_input)``.

    For batched input the parameter gradients are summed over the batch.
    ``grad_input`` is ``None`` when ``input_grad`` is false.
    """
    x, single = _batched(x)
    g, _ = _batched(upstream)
    ho, wo = _check_conv_input(x, params)
    o = params.out_channels
    if g.shape != (x.shape[0], o, ho, wo):
        raise ShapeError("upstream gradient shape", (x.shape[0], o, ho, wo), g.shape)
    kh, kw = params.kernel.shape[2:]
    cols = _im2col(_pad(x, params.padding), kh, kw, params.stride, ho, wo)
    gmat = _channels_first(g)
    grad_kernel = (gmat @ cols.T).reshape(params.kernel.shape)
    grad_bias = gmat.sum(axis=1)
    if not input_grad:
        return grad_kernel, grad_bias, None
    grad_input = conv2d_transpose(g, params, input_hw=x.shape[2:])
    return grad_kernel, grad_bias, (grad_input[0] if single else grad_input)


def maxpool_forward(x, window, stride):
    """Max-pool returning values and a :class:`SwitchRecord`.

    Ties go to the first element in row-major window order.
    """
    x, single = _batched(x)
    kh, kw = (window, window) if np.isscalar(window) else tuple(window)
    if kh < 1 or kw < 1 or stride < 1:
        raise ValueError(f"window and stride must be >= 1, got {(kh, kw)}, {stride}")
    n, c, h, w = x.shape
    if kh > h or kw > w:
        raise ShapeError("pool window vs input extent", f"<= {(h, w)}", (kh, kw))
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    flat = win.reshape(n, c, ho, wo, kh * kw)
    arg = flat.argmax(axis=-1)
    values = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    di, dj = np.divmod(arg, kw)
    rows = np.arange(ho)[:, None] * stride + di
    cols = np.arange(wo)[None, :] * stride + dj
    idx = (np.arange(c)[:, None, None] * h + rows) * w + cols
    rec = SwitchRecord((c, h, w), (c, ho, wo), (kh, kw), stride, idx[0] if single else idx)
    values = np.ascontiguousarray(values)
    return (values[0] if single else values), rec


def unpool(response, switches: SwitchRecord):
    """Place each pooled value at its recorded switch position; zeros elsewhere.

    Positions shared by overlapping windows receive the sum of contributions.
    """
    r = np.asarray(response, dtype=DTYPE)
    idx = np.asarray(switches.indices)
    if r.shape != idx.shape:
        raise ShapeError("response vs switch pooled shape", idx.shape, r.shape)
    size = int(np.prod(switches.input_shape))
    if idx.size and (idx.min() < 0 or idx.max() >= size):
        raise SwitchError(f"switch index out of bounds for input shape {switches.input_shape}")
    if r.ndim == 3:
        return np.bincount(idx.ravel(), weights=r.ravel(), minlength=size).reshape(switches.input_shape)
    n = r.shape[0]
    offs = (np.arange(n) * size).reshape(n, 1, 1, 1)
    out = np.bincount((idx + offs).ravel(), weights=r.ravel(), minlength=n * size)
    return out.reshape((n,) + tuple(switches.input_shape))


def maxpool_grad(upstream, switches: SwitchRecord):
    return unpool(upstream, switches)


def relu_forward(x):
    return np.maximum(np.asarray(x, dtype=DTYPE), 0.0)


def relu_grad(x, upstream):
    x = np.asarray(x)
    g = np.asarray(upstream, dtype=DTYPE)
    if x.shape != g.shape:
        raise ShapeError("relu upstream shape", x.shape, g.shape)
    return np.where(x > 0, g, 0.0)


def dense_forward(x, params: DenseParams):
    """Affine layer on a flattened input: 1-D ``x`` or a ``(N, ...)`` batch."""
    x = np.asarray(x, dtype=DTYPE)
    single = x.ndim <= 1 or (x.ndim == 3)
    xm = x.reshape(1, -1) if single else x.reshape(x.shape[0], -1)
    if xm.shape[1] != params.weight.shape[1]:
        raise ShapeError("dense input features", params.weight.shape[1], xm.shape[1])
    y = xm @ params.weight.T + params.bias
    return y[0] if single else y


def dense_grad(x, params: DenseParams, upstream):
    """``(grad_weight, grad_bias, grad_input)``; grad_input has ``x``'s shape."""
    x = np.asarray(x, dtype=DTYPE)
    single = x.ndim <= 1 or (x.ndim == 3)
    xm = x.reshape(1, -1) if single else x.reshape(x.shape[0], -1)
    g = np.asarray(upstream, dtype=DTYPE).reshape(xm.shape[0], -1)
    if g.shape[1] != params.weight.shape[0]:
        raise ShapeError("dense upstream features", params.weight.shape[0], g.shape[1])
    grad_w = g.T @ xm
    grad_b = g.sum(axis=0)
    grad_x = (g @ params.weight).reshape(x.shape)
    return grad_w, grad_b, grad_x


def softmax(logits):
    z = np.asarray(logits, dtype=DTYPE)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_labels(labels, k):
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise LabelError(f"label out of range for {k} classes: {labels.min()}..{labels.max()}")
    return labels


def cross_entropy(probs, label):
    """Negative log-likelihood; mean over the batch for 2-D ``probs``."""
    p = np.asarray(probs, dtype=DTYPE)
    label = _check_labels(label, p.shape[-1])
    tiny = np.finfo(DTYPE).tiny
    if p.ndim == 1:
        return float(-np.log(max(p[int(label)], tiny)))
    picked = p[np.arange(p.shape[0]), label]
    return float(-np.log(np.maximum(picked, tiny)).mean())


def softmax_ce_grad(logits, label):
    """Gradient of ``cross_entropy(softmax(logits), label)`` w.r.t. logits."""
    z = np.asarray(logits, dtype=DTYPE)
    label = _check_labels(label, z.shape[-1])
    g = softmax(z)
    if z.ndim == 1:
        g[int(label)] -= 1.0
        return g
    g[np.arange(z.shape[0]), label] -= 1.0
    return g / z.shape[0]
