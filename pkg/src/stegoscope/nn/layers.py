"""Layer objects wrapping the kernels in :mod:`.functional`.

A layer owns ``params`` (trainable), ``buffers`` (batch-norm running stats)
and, after ``backward``, ``grads`` keyed like ``params``. ``forward`` caches
what ``backward`` needs, so calls must alternate.
"""

import math

import numpy as np

from . import functional as F


def he_uniform(rng, shape, fan_in):
    bound = math.sqrt(6.0 / fan_in)
    return (rng.uniform(int(np.prod(shape))) * 2.0 - 1.0).reshape(shape) * bound


class Layer:
    def __init__(self):
        self.params = {}
        self.buffers = {}
        self.grads = {}

    def forward(self, x, train=True):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def __call__(self, x, train=True):
        return self.forward(x, train)


class Conv2d(Layer):
    """3x3 convolution, zero padding 1.

    ``bias=False`` suits a conv feeding batch norm, where a bias is cancelled
    by the mean subtraction and would only ever receive a zero gradient.
    """

    def __init__(self, in_ch, out_ch, stride=1, rng=None, bias=True):
        super().__init__()
        self.stride = stride
        shape = (out_ch, in_ch, 3, 3)
        self.params["weight"] = he_uniform(rng, shape, in_ch * 9) if rng else np.zeros(shape)
        self._zero_bias = np.zeros(out_ch)
        if bias:
            self.params["bias"] = np.zeros(out_ch)

    def forward(self, x, train=True):
        b = self.params.get("bias", self._zero_bias)
        out, self._cache = F.conv2d_forward(x, self.params["weight"], b, self.stride)
        return out

    def backward(self, grad):
        gx, gw, gb = F.conv2d_backward(grad, self._cache, self.params["weight"])
        self.grads = {"weight": gw}
        if "bias" in self.params:
            self.grads["bias"] = gb
        return gx


class HighPass(Layer):
    """Fixed 3x3 second-order residual filter (no trainable parameters).

    Suppresses image content so that small pixel-level perturbations are
    not swamped by brightness in the first learned layer.
    """

    KERNEL = np.array([[-1.0, 2.0, -1.0],
                       [2.0, -4.0, 2.0],
                       [-1.0, 2.0, -1.0]]) / 4.0

    def __init__(self):
        super().__init__()
        # kept as a buffer so weight files record that the filter is present
        self.buffers["kernel"] = self.KERNEL[None, None].copy()
        self._bias = np.zeros(1)

    def forward(self, x, train=True):
        out, self._cache = F.conv2d_forward(x, self.buffers["kernel"], self._bias, 1)
        return out

    def backward(self, grad):
        return F.conv2d_backward(grad, self._cache, self.buffers["kernel"])[0]


class BatchNorm2d(Layer):
    def __init__(self, channels):
        super().__init__()
        self.params["gamma"] = np.ones(channels)
        self.params["beta"] = np.zeros(channels)
        self.buffers["running_mean"] = np.zeros(channels)
        self.buffers["running_var"] = np.ones(channels)

    def forward(self, x, train=True):
        out, self._cache = F.batchnorm_forward(
            x, self.params["gamma"], self.params["beta"],
            self.buffers["running_mean"], self.buffers["running_var"], train)
        return out

    @property
    def batch_stats(self):
        """``(mean, var)`` used by the most recent forward pass."""
        return self._cache[4], self._cache[5]

    def backward(self, grad):
        gx, gg, gb = F.batchnorm_backward(grad, self._cache)
        self.grads = {"gamma": gg, "beta": gb}
        return gx


class ReLU(Layer):
    def forward(self, x, train=True):
        out, self._cache = F.relu_forward(x)
        return out

    def backward(self, grad):
        return F.relu_backward(grad, self._cache)


class Sigmoid(Layer):
    def forward(self, x, train=True):
        self._out = F.sigmoid(x)
        return self._out

    def backward(self, grad):
        return F.sigmoid_backward(grad, self._out)


class GlobalAvgPool(Layer):
    def forward(self, x, train=True):
        out, self._shape = F.gap_forward(x)
        return out

    def backward(self, grad):
        return F.gap_backward(grad, self._shape)


class Dense(Layer):
    def __init__(self, n_in, n_out, rng=None):
        super().__init__()
        self.params["weight"] = he_uniform(rng, (n_in, n_out), n_in) if rng else np.zeros((n_in, n_out))
        self.params["bias"] = np.zeros(n_out)

    def forward(self, x, train=True):
        out, self._x = F.dense_forward(x, self.params["weight"], self.params["bias"])
        return out

    def backward(self, grad):
        gx, gw, gb = F.dense_backward(grad, self._x, self.params["weight"])
        self.grads = {"weight": gw, "bias": gb}
        return gx


class Upsample2x(Layer):
    """Nearest-neighbour upsampling by two in both spatial axes."""

    def forward(self, x, train=True):
        return F.upsample_forward(x)

    def backward(self, grad):
        return F.upsample_backward(grad)


class SEBlock(Layer):
    def __init__(self, channels, ratio=4, rng=None):
        super().__init__()
        if channels % ratio:
            raise ValueError(f"SE ratio {ratio} does not divide {channels} channels")
        hidden = channels // ratio
        for name, shape, fan in (("w_reduce", (channels, hidden), channels),
                                 ("w_expand", (hidden, channels), hidden)):
            self.params[name] = he_uniform(rng, shape, fan) if rng else np.zeros(shape)
        self.params["b_reduce"] = np.zeros(hidden)
        self.params["b_expand"] = np.zeros(channels)

    def forward(self, x, train=True):
        p = self.params
        out, self._cache = F.se_forward(x, p["w_reduce"], p["b_reduce"], p["w_expand"], p["b_expand"])
        return out

    def backward(self, grad):
        gx, gwr, gbr, gwe, gbe = F.se_backward(grad, self._cache, self.params["w_reduce"],
                                               self.params["w_expand"])
        self.grads = {"w_reduce": gwr, "b_reduce": gbr, "w_expand": gwe, "b_expand": gbe}
        return gx


class Sequential(Layer):
    def __init__(self, *layers):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x, train=True):
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def named_layers(self, prefix=""):
        for i, layer in enumerate(self.layers):
            yield f"{prefix}{i}", layer
