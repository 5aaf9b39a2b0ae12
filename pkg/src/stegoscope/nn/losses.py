import numpy as np

from ..errors import ShapeMismatch

BCE_CLAMP = 1e-7


def bce(pred, label):
    """Mean binary cross-entropy and its gradient w.r.t. ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    if pred.shape != label.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs label {label.shape}")
    p = np.clip(pred, BCE_CLAMP, 1 - BCE_CLAMP)
    loss = -np.mean(label * np.log(p) + (1 - label) * np.log(1 - p))
    grad = (p - label) / (p * (1 - p)) / p.size
    # no gradient flows through the clamp
    grad = np.where((pred < BCE_CLAMP) | (pred > 1 - BCE_CLAMP), 0.0, grad)
    return float(loss), grad


def masked_mse(pred, target, mask):
    """``sum(mask * (pred - target)**2) / max(sum(mask), 1)`` and its gradient.

    An all-zero mask (a cover sample) gives loss 0 and zero gradient.
    """
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != np.shape(target) or pred.shape != np.shape(mask):
        raise ShapeMismatch(f"pred {pred.shape}, target {np.shape(target)}, mask {np.shape(mask)}")
    m = np.asarray(mask, dtype=np.float64)
    denom = max(m.sum(), 1.0)
    diff = (pred - target) * m
    return float((diff * diff).sum() / denom), 2.0 * diff / denom
