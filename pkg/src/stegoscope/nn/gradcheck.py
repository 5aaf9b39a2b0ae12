"""Central finite-difference gradient checking."""

import numpy as np


def rel_error(analytic, numeric):
    a = np.abs(analytic)
    n = np.abs(numeric)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(a, n), 1e-8)


def numeric_grad(f, x):
    """Central differences of scalar ``f()`` w.r.t. array ``x``, perturbed in place."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        h = 1e-5 * max(1.0, abs(orig))
        x[idx] = orig + h
        fp = f()
        x[idx] = orig - h
        fm = f()
        x[idx] = orig
        grad[idx] = (fp - fm) / (2 * h)
    return grad


def grad_check(layer, x, seed=0, train=True):
    """Max relative error of ``layer``'s input and parameter gradients.

    The layer output is projected onto fixed random weights to get a scalar.
    Batch-norm running statistics are restored around every evaluation so
    repeated forwards see identical state.
    """
    x = np.array(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    buffers = _collect(layer, "buffers")
    saved = {k: v.copy() for k, v in buffers.items()}

    def restore():
        for k, v in saved.items():
            buffers[k][...] = v

    probe = rng.standard_normal(layer.forward(x, train).shape)
    restore()

    def loss():
        out = layer.forward(x, train)
        restore()
        return float((out * probe).sum())

    layer.forward(x, train)
    restore()
    gx = layer.backward(probe)
    grads = _collect(layer, "grads")
    worst = rel_error(gx, numeric_grad(loss, x)).max()
    for name, p in _collect(layer, "params").items():
        worst = max(worst, rel_error(grads[name], numeric_grad(loss, p)).max())
    return float(worst)


def _collect(layer, attr, prefix=""):
    out = {prefix + k: v for k, v in getattr(layer, attr).items()}
    for i, sub in enumerate(getattr(layer, "layers", [])):
        out.update(_collect(sub, attr, f"{prefix}{i}."))
    return out
