"""Stateless forward/backward kernels. Everything is float64 and NCHW."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DegenerateBatch, ShapeMismatch

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def _check_finite(x, where):
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values entering {where}")


def _im2col(x, stride):
    """(B, C, H, W) -> (B, H', W', C*9) patches of the zero-padded input."""
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(2, 3))[:, :, ::stride, ::stride]
    b, c, ho, wo = win.shape[:4]
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(b, ho, wo, c * 9)


def conv2d_forward(x, kernels, bias, stride=1):
    """3x3 cross-correlation, zero padding 1; returns ``(out, cache)``."""
    if x.ndim != 4 or kernels.ndim != 4 or kernels.shape[1:] != (x.shape[1], 3, 3):
        raise ShapeMismatch(f"input {x.shape} incompatible with kernels {kernels.shape}")
    if bias.shape != (kernels.shape[0],):
        raise ShapeMismatch(f"bias {bias.shape} for {kernels.shape[0]} output channels")
    if stride not in (1, 2):
        raise ValueError("stride must be 1 or 2")
    _check_finite(x, "conv2d")
    cols = _im2col(x, stride)
    w = kernels.reshape(kernels.shape[0], -1)
    out = cols @ w.T + bias
    return out.transpose(0, 3, 1, 2), (x.shape, cols, stride)


def conv2d_backward(grad_out, cache, kernels):
    """Returns ``(grad_input, grad_kernels, grad_bias)``."""
    shape, cols, stride = cache
    b, c, h, w = shape
    oc = kernels.shape[0]
    if grad_out.shape[:2] != (b, oc) or grad_out.shape[2:] != cols.shape[1:3]:
        raise ShapeMismatch(f"grad {grad_out.shape} does not match forward output")
    g = grad_out.transpose(0, 2, 3, 1)                       # B, H', W', OC
    g2 = g.reshape(-1, oc)
    grad_k = (g2.T @ cols.reshape(-1, c * 9)).reshape(kernels.shape)
    grad_b = g2.sum(axis=0)
    gcols = (g2 @ kernels.reshape(oc, -1)).reshape(b, *cols.shape[1:3], c, 3, 3)
    gx = np.zeros((b, c, h + 2, w + 2))
    ho, wo = cols.shape[1:3]
    for i in range(3):
        for j in range(3):
            gx[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return gx[:, :, 1:-1, 1:-1], grad_k, grad_b


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train=True):
    """Per-channel batch norm. In train mode the running stats are updated in place."""
    if gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeMismatch("gamma/beta must have one entry per channel")
    if train:
        count = x.shape[0] * x.shape[2] * x.shape[3]
        if count < 2:
            raise DegenerateBatch(f"batch norm needs >= 2 values per channel, got {count}")
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        running_mean *= BN_MOMENTUM
        running_mean += (1 - BN_MOMENTUM) * mean
        running_var *= BN_MOMENTUM
        running_var += (1 - BN_MOMENTUM) * var
    else:
        mean, var = running_mean, running_var
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean[:, None, None]) * inv[:, None, None]
    out = gamma[:, None, None] * xhat + beta[:, None, None]
    return out, (xhat, inv, gamma, train, mean, var)


def batchnorm_backward(grad_out, cache):
    """Returns ``(grad_input, grad_gamma, grad_beta)``."""
    xhat, inv, gamma, train = cache[:4]
    grad_gamma = (grad_out * xhat).sum(axis=(0, 2, 3))
    grad_beta = grad_out.sum(axis=(0, 2, 3))
    gxhat = grad_out * gamma[:, None, None]
    if not train:
        return gxhat * inv[:, None, None], grad_gamma, grad_beta
    m = xhat.shape[0] * xhat.shape[2] * xhat.shape[3]
    gx = (inv[:, None, None] / m) * (
        m * gxhat
        - gxhat.sum(axis=(0, 2, 3))[:, None, None]
        - xhat * (gxhat * xhat).sum(axis=(0, 2, 3))[:, None, None]
    )
    return gx, grad_gamma, grad_beta


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(grad_out, cache):
    return grad_out * cache


def sigmoid(x):
    # split by sign so neither branch overflows
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid_backward(grad_out, out):
    return grad_out * out * (1.0 - out)


def gap_forward(x):
    return x.mean(axis=(2, 3)), x.shape


def gap_backward(grad_out, shape):
    h, w = shape[2:]
    return np.broadcast_to(grad_out[:, :, None, None] / (h * w), shape).copy()


def dense_forward(x, weight, bias):
    if x.ndim != 2 or weight.shape[0] != x.shape[1] or bias.shape != (weight.shape[1],):
        raise ShapeMismatch(f"dense input {x.shape} vs weight {weight.shape}")
    return x @ weight + bias, x


def dense_backward(grad_out, x, weight):
    return grad_out @ weight.T, x.T @ grad_out, grad_out.sum(axis=0)


def upsample_forward(x):
    return x.repeat(2, axis=2).repeat(2, axis=3)


def upsample_backward(grad_out):
    b, c, h, w = grad_out.shape
    return grad_out.reshape(b, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


def se_forward(x, w_reduce, b_reduce, w_expand, b_expand):
    """Squeeze-and-excitation: rescale channels by ``sigmoid(W2 relu(W1 gap(x)))``."""
    c = x.shape[1]
    if w_reduce.shape[0] != c or w_expand.shape != (w_reduce.shape[1], c):
        raise ShapeMismatch(f"SE weights {w_reduce.shape}/{w_expand.shape} for {c} channels")
    s, _ = gap_forward(x)
    z1 = s @ w_reduce + b_reduce
    a1 = np.maximum(z1, 0.0)
    gate = sigmoid(a1 @ w_expand + b_expand)
    return x * gate[:, :, None, None], (x, s, z1, a1, gate)


def se_backward(grad_out, cache, w_reduce, w_expand):
    """Returns ``(grad_input, grad_w_reduce, grad_b_reduce, grad_w_expand, grad_b_expand)``."""
    x, s, z1, a1, gate = cache
    h, w = x.shape[2:]
    g_gate = (grad_out * x).sum(axis=(2, 3))
    g_z2 = g_gate * gate * (1.0 - gate)
    g_we = a1.T @ g_z2
    g_be = g_z2.sum(axis=0)
    g_z1 = (g_z2 @ w_expand.T) * (z1 > 0)
    g_wr = s.T @ g_z1
    g_br = g_z1.sum(axis=0)
    g_s = g_z1 @ w_reduce.T
    gx = grad_out * gate[:, :, None, None] + g_s[:, :, None, None] / (h * w)
    return gx, g_wr, g_br, g_we, g_be
