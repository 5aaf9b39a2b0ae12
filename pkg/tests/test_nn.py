import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from stegoscope.errors import DegenerateBatch, NonFiniteGradient, ShapeMismatch
from stegoscope.nn import functional as F
from stegoscope.nn import (Adam, BatchNorm2d, Conv2d, Dense, GlobalAvgPool, HighPass, ReLU, SEBlock,
                           Sequential, Sigmoid, Upsample2x, bce, grad_check, masked_mse)
from stegoscope.splitmix import SplitMix64

DELTA = np.zeros((1, 1, 3, 3))
DELTA[0, 0, 1, 1] = 1.0


def _rand(seed, *shape):
    return np.random.default_rng(seed).standard_normal(shape)


# --- convolution -----------------------------------------------------------

def test_conv_all_ones():
    out, _ = F.conv2d_forward(np.ones((1, 1, 3, 3)), np.ones((1, 1, 3, 3)), np.zeros(1))
    assert out[0, 0].tolist() == [[4, 6, 4], [6, 9, 6], [4, 6, 4]]


def test_conv_delta_is_identity():
    x = _rand(0, 2, 1, 5, 7)
    out, cache = F.conv2d_forward(x, DELTA, np.zeros(1))
    assert np.array_equal(out, x)
    g = _rand(1, 2, 1, 5, 7)
    gx, _, _ = F.conv2d_backward(g, cache, DELTA)
    assert np.allclose(gx, g)


def test_conv_stride2_shape():
    out, _ = F.conv2d_forward(np.ones((1, 1, 4, 4)), np.ones((3, 1, 3, 3)), np.zeros(3), stride=2)
    assert out.shape == (1, 3, 2, 2)
    out, _ = F.conv2d_forward(np.ones((1, 1, 5, 5)), np.ones((3, 1, 3, 3)), np.zeros(3), stride=2)
    assert out.shape == (1, 3, 3, 3)


def test_conv_zero_grad():
    x = _rand(2, 1, 2, 5, 5)
    k = _rand(3, 3, 2, 3, 3)
    _, cache = F.conv2d_forward(x, k, np.zeros(3))
    for g in F.conv2d_backward(np.zeros((1, 3, 5, 5)), cache, k):
        assert not g.any()


def test_conv_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        F.conv2d_forward(np.ones((1, 2, 4, 4)), np.ones((1, 1, 3, 3)), np.zeros(1))


def test_nonfinite_input_rejected():
    x = np.ones((1, 1, 3, 3))
    x[0, 0, 1, 1] = np.nan
    with pytest.raises(FloatingPointError):
        F.conv2d_forward(x, DELTA, np.zeros(1))


# --- batch norm ------------------------------------------------------------

def test_bn_constant_channel_train():
    x = np.full((2, 3, 4, 4), 7.0)
    out, _ = F.batchnorm_forward(x, np.ones(3), np.zeros(3), np.zeros(3), np.ones(3), True)
    assert np.array_equal(out, np.zeros_like(x))


def test_bn_gamma_zero():
    x = _rand(4, 2, 3, 4, 4)
    beta = np.array([0.5, -1.0, 2.0])
    out, _ = F.batchnorm_forward(x, np.zeros(3), beta, np.zeros(3), np.ones(3), True)
    assert np.allclose(out, beta[None, :, None, None])


def test_bn_infer_identity_normalisation():
    x = _rand(5, 2, 2, 3, 3)
    gamma, beta = np.array([2.0, 0.5]), np.array([1.0, -1.0])
    out, _ = F.batchnorm_forward(x, gamma, beta, np.zeros(2), np.ones(2), False)
    assert np.allclose(out, gamma[None, :, None, None] * x / math.sqrt(1 + 1e-5) + beta[None, :, None, None])


def test_bn_train_statistics_and_running_update():
    x = _rand(6, 4, 2, 5, 5) * 3 + 1
    rm, rv = np.zeros(2), np.ones(2)
    out, _ = F.batchnorm_forward(x, np.ones(2), np.zeros(2), rm, rv, True)
    assert np.allclose(out.mean(axis=(0, 2, 3)), 0, atol=1e-12)
    assert np.allclose(out.var(axis=(0, 2, 3)), 1, atol=1e-5)
    assert np.allclose(rm, 0.1 * x.mean(axis=(0, 2, 3)))
    assert np.allclose(rv, 0.9 + 0.1 * x.var(axis=(0, 2, 3)))


def test_bn_degenerate_batch():
    with pytest.raises(DegenerateBatch):
        F.batchnorm_forward(np.ones((1, 1, 1, 1)), np.ones(1), np.zeros(1), np.zeros(1), np.ones(1), True)


# --- SE block ----------------------------------------------------------------

def test_se_zero_expand_halves():
    x = _rand(7, 1, 4, 2, 2)
    out, _ = F.se_forward(x, _rand(8, 4, 1), np.zeros(1), np.zeros((1, 4)), np.zeros(4))
    assert np.allclose(out, 0.5 * x)


def test_se_saturated_gate_passes_through():
    x = _rand(9, 1, 4, 2, 2)
    out, _ = F.se_forward(x, _rand(8, 4, 1), np.zeros(1), np.zeros((1, 4)), np.full(4, 50.0))
    assert np.allclose(out, x)


def test_se_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        F.se_forward(np.ones((1, 4, 2, 2)), np.ones((3, 1)), np.zeros(1), np.ones((1, 4)), np.zeros(4))


def test_se_ratio_must_divide():
    with pytest.raises(ValueError):
        SEBlock(6, 4, SplitMix64(0))


# --- losses ------------------------------------------------------------------

def test_bce_examples():
    assert bce(np.array([0.5]), np.array([1.0]))[0] == pytest.approx(math.log(2), abs=1e-6)
    assert bce(np.array([1 - 1e-7]), np.array([1.0]))[0] == pytest.approx(1e-7, abs=1e-9)
    assert bce(np.array([0.5]), np.array([0.0]))[0] == bce(np.array([0.5]), np.array([1.0]))[0]
    assert math.isfinite(bce(np.array([0.0, 1.0]), np.array([1.0, 0.0]))[0])


def test_bce_gradient():
    p = np.array([0.2, 0.7, 0.9])
    y = np.array([0.0, 1.0, 1.0])
    _, g = bce(p, y)
    num = np.array([(bce(p + h, y)[0] - bce(p - h, y)[0]) / 2e-6
                    for h in np.eye(3) * 1e-6])
    assert np.allclose(g, num, rtol=1e-6)


def test_masked_mse_examples():
    t = _rand(10, 7, 4, 4)
    m = np.ones_like(t)
    assert masked_mse(t, t, m)[0] == 0
    p, tt, mm = np.zeros((7, 2, 2)), np.zeros((7, 2, 2)), np.zeros((7, 2, 2))
    p[3, 1, 0] = 1.0
    mm[3, 1, 0] = 1
    assert masked_mse(p, tt, mm)[0] == 1.0
    loss, g = masked_mse(t, np.zeros_like(t), np.zeros_like(t))
    assert loss == 0 and not g.any()
    with pytest.raises(ShapeMismatch):
        masked_mse(t, t[:6], m)


# --- Adam --------------------------------------------------------------------

def test_adam_zero_grad():
    p = {"w": np.array([1.0, -2.0])}
    opt = Adam(p)
    opt.step({"w": np.zeros(2)})
    assert p["w"].tolist() == [1.0, -2.0] and opt.t == 1


def test_adam_first_step():
    p = {"w": np.array([0.0])}
    Adam(p, lr=0.001).step({"w": np.array([0.5])})
    assert p["w"][0] == pytest.approx(-0.001 * 0.5 / (0.5 + 1e-8), rel=1e-12)


def test_adam_constant_gradient_step_size():
    p = {"w": np.array([0.0])}
    opt = Adam(p, lr=0.01)
    prev = 0.0
    for _ in range(500):
        opt.step({"w": np.array([-3.0])})
        delta, prev = p["w"][0] - prev, p["w"][0]
    assert delta == pytest.approx(0.01, rel=1e-6)


def test_adam_nonfinite():
    p = {"w": np.zeros(1)}
    with pytest.raises(NonFiniteGradient):
        Adam(p).step({"w": np.array([np.inf])})
    assert p["w"][0] == 0


# --- gradient checks ---------------------------------------------------------

def _layers():
    rng = SplitMix64(11)
    return {
        "dense": (Dense(4, 3, rng), _rand(0, 8, 4)),
        "conv_s1": (Conv2d(2, 3, 1, rng), _rand(1, 1, 2, 5, 5)),
        "conv_s2": (Conv2d(2, 3, 2, rng), _rand(2, 2, 2, 6, 6)),
        "conv_nobias": (Conv2d(2, 2, 2, rng, bias=False), _rand(3, 2, 2, 5, 5)),
        "highpass": (HighPass(), _rand(4, 2, 1, 6, 6)),
        "batchnorm": (BatchNorm2d(3), _rand(5, 3, 3, 3, 3)),
        "relu": (ReLU(), _rand(6, 2, 3, 4, 4)),
        "sigmoid": (Sigmoid(), _rand(7, 2, 3, 4, 4)),
        "gap": (GlobalAvgPool(), _rand(8, 2, 3, 4, 4)),
        "upsample": (Upsample2x(), _rand(9, 2, 3, 3, 3)),
        "se": (SEBlock(4, 4, rng), _rand(10, 1, 4, 2, 2)),
        "block": (Sequential(Conv2d(2, 4, 2, rng, bias=False), BatchNorm2d(4), ReLU(), SEBlock(4, 4, rng)),
                  _rand(11, 3, 2, 6, 6)),
    }


@pytest.mark.parametrize("name", list(_layers()))
def test_layer_grad_check(name):
    layer, x = _layers()[name]
    assert grad_check(layer, x) < 1e-6


def test_bn_grad_check_infer_mode():
    bn = BatchNorm2d(2)
    bn.buffers["running_mean"][:] = [0.3, -0.2]
    bn.buffers["running_var"][:] = [2.0, 0.5]
    assert grad_check(bn, _rand(12, 2, 2, 3, 3), train=False) < 1e-6


# --- properties --------------------------------------------------------------

maps = arrays(np.float64, (2, 3, 4, 4), elements=st.floats(-50, 50, allow_nan=False))


@settings(max_examples=40, deadline=None)
@given(maps)
def test_relu_idempotent(x):
    r = ReLU()
    once = r.forward(x)
    assert np.array_equal(r.forward(once), once)


@settings(max_examples=40, deadline=None)
@given(maps)
def test_sigmoid_bounded(x):
    s = F.sigmoid(x / 10)
    assert ((s > 0) & (s < 1)).all()


@settings(max_examples=40, deadline=None)
@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_constant_map_gap_and_upsample(c):
    x = np.full((1, 2, 4, 4), c)
    assert np.allclose(F.gap_forward(x)[0], c)
    assert np.array_equal(F.upsample_forward(x), np.full((1, 2, 8, 8), c))
