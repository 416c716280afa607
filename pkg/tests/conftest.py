import numpy as np
import pytest

from armaps import numerics as nx
from armaps.network import RELU, SOFTMAX, NetworkSpec, conv, dense, init_params, pool


def direct_conv(x, kernel, bias, stride, pad):
    """Nested-loop cross-correlation, the reference for every conv test."""
    c, h, w = x.shape
    o, _, kh, kw = kernel.shape
    xp = np.zeros((c, h + 2 * pad, w + 2 * pad))
    xp[:, pad : pad + h, pad : pad + w] = x
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((o, ho, wo))
    for f in range(o):
        for i in range(ho):
            for j in range(wo):
                acc = bias[f]
                for ci in range(c):
                    for a in range(kh):
                        for b in range(kw):
                            acc += xp[ci, i * stride + a, j * stride + b] * kernel[f, ci, a, b]
                out[f, i, j] = acc
    return out


def tiny_spec(size=12, c1=3, c2=4, classes=3):
    """Two conv layers and one pool: conv(3x3) relu pool2 conv(3x3) relu dense softmax."""
    layers = [conv(c1, 3), RELU, pool(2), conv(c2, 3), RELU, dense(classes), SOFTMAX]
    return NetworkSpec(layers, (1, size, size), classes, name="tiny")


def masked_chain_matrix(spec, params, trace, unit, layer=None):
    """Rows: input pixels; columns: positions of channel ``unit`` at the chosen conv layer.

    Built by pushing basis images forward through the bias-free linear chain
    with pool layers frozen to the recorded switches and ReLUs as identity.
    """
    layer = spec.last_conv if layer is None else layer
    n = int(np.prod(spec.input_shape))
    cols = []
    for i in range(n):
        h = np.zeros(n)
        h[i] = 1.0
        h = h.reshape(spec.input_shape)
        for j in range(layer + 1):
            l = spec.layers[j]
            if l.kind == "conv":
                p = params[j]
                h = nx.conv2d_forward(h, nx.ConvParams(p.kernel, np.zeros_like(p.bias), p.stride, p.padding))
            elif l.kind == "maxpool":
                h = h.ravel()[trace.switches[j].indices]
        cols.append(h[unit].ravel())
    return np.stack(cols)  # (n_inputs, positions)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one PASS/FAIL line per acceptance criterion for the run summary."""
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny():
    spec = tiny_spec()
    params = init_params(spec, np.random.default_rng(7))
    for p in params:
        if p is not None:
            p.bias[:] = np.random.default_rng(8).uniform(-0.1, 0.1, p.bias.shape)
    return spec, params
