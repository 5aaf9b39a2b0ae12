"""The dual-head detection / payload-reconstruction network and its training loop.

Front end: an optional fixed high-pass residual filter (on by default).
Trunk: ``depth`` blocks of stride-2 conv -> batch norm -> ReLU -> SE.
Detection head: global average pool -> dense -> sigmoid.
Reconstruction head: ``depth`` blocks of 2x nearest upsample -> conv -> ReLU,
then a conv to 7 channels and a sigmoid, giving one bit plane per possible
bit position at full input resolution.
"""

import struct
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import BadConfig, BadMagic, EmptySplit, NonFiniteLoss, ShapeMismatch, TruncatedData, VersionMismatch
from .image_io import normalize
from .nn import (Adam, BatchNorm2d, Conv2d, Dense, GlobalAvgPool, HighPass, ReLU, SEBlock, Sequential, Sigmoid,
                 Upsample2x, bce, masked_mse)
from .nn.gradcheck import _collect, numeric_grad, rel_error
from .splitmix import SplitMix64

OUT_CHANNELS = 7
WEIGHTS_MAGIC = b"APVDNN01"
WEIGHTS_VERSION = 1
FULL_CHANNELS = (8, 16, 32, 64, 128)


@dataclass
class ModelConfig:
    input_size: int = 64
    depth: int = 3
    block_channels: Optional[List[int]] = None
    se_ratio: int = 4
    lambda_recover: float = 1.0
    highpass: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.block_channels is None:
            self.block_channels = list(FULL_CHANNELS[:self.depth])
        self.block_channels = [int(c) for c in self.block_channels]

    def validate(self):
        if self.depth < 1:
            raise BadConfig("depth must be >= 1")
        if len(self.block_channels) != self.depth:
            raise BadConfig(f"{len(self.block_channels)} channel entries for depth {self.depth}")
        if any(c <= 0 or c % self.se_ratio for c in self.block_channels):
            raise BadConfig(f"channels {self.block_channels} must be positive multiples of {self.se_ratio}")
        if self.input_size % (2 ** self.depth):
            raise BadConfig(f"input size {self.input_size} not divisible by 2**{self.depth}")


def full_profile(**kw):
    """256x256 input, five blocks of 8..128 channels."""
    return ModelConfig(input_size=256, depth=5, block_channels=list(FULL_CHANNELS), **kw)


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch: int = 32
    epochs: int = 50
    seed: int = 0

    def validate(self):
        if self.batch < 2:
            raise BadConfig("batch must be >= 2 for batch norm")
        if self.lr <= 0:
            raise BadConfig("learning rate must be positive")


class StegModel:
    def __init__(self, config):
        config.validate()
        self.config = config
        rng = SplitMix64(config.seed)
        ch = config.block_channels
        blocks = []
        c_in = 1
        for c in ch:
            blocks.append(Sequential(Conv2d(c_in, c, 2, rng, bias=False), BatchNorm2d(c), ReLU(),
                                     SEBlock(c, config.se_ratio, rng)))
            c_in = c
        self.front = Sequential(HighPass()) if config.highpass else Sequential()
        self.trunk = Sequential(*blocks)
        self.detect = Sequential(GlobalAvgPool(), Dense(ch[-1], 1, rng), Sigmoid())
        ups = []
        for i in range(config.depth):
            c_out = ch[config.depth - 2 - i] if i < config.depth - 1 else ch[0]
            ups.append(Sequential(Upsample2x(), Conv2d(c_in, c_out, 1, rng), ReLU()))
            c_in = c_out
        ups.append(Sequential(Conv2d(c_in, OUT_CHANNELS, 1, rng), Sigmoid()))
        self.recover = Sequential(*ups)
        self._parts = (("front.", self.front), ("trunk.", self.trunk), ("detect.", self.detect), ("recover.", self.recover))

    def _gather(self, attr):
        out = {}
        for prefix, part in self._parts:
            out.update(_collect(part, attr, prefix))
        return out

    def params(self):
        return self._gather("params")

    def buffers(self):
        return self._gather("buffers")

    def grads(self):
        return self._gather("grads")

    def state(self):
        """Every tensor that defines the model, params then buffers."""
        return {**self.params(), **self.buffers()}

    def num_params(self):
        return sum(p.size for p in self.params().values())

    def forward(self, x, train=False):
        """``x`` is (B, 1, S, S) in [0, 1]; returns ``(detection (B,), recovery (B, 7, S, S))``."""
        if x.ndim != 4 or x.shape[1] != 1 or x.shape[2] % (2 ** self.config.depth) or x.shape[2] != x.shape[3]:
            raise ShapeMismatch(f"input batch {x.shape} does not fit depth {self.config.depth}")
        feats = self.trunk.forward(self.front.forward(x, train), train)
        det = self.detect.forward(feats, train)[:, 0]
        rec = self.recover.forward(feats, train)
        return det, rec

    def backward(self, g_det, g_rec):
        g_feats = self.detect.backward(g_det[:, None]) + self.recover.backward(g_rec)
        return self.front.backward(self.trunk.backward(g_feats))

    def loss_and_grad(self, x, labels, targets, masks):
        """Forward in train mode, combined loss, backward. Returns ``(total, det, rec)``."""
        det, rec = self.forward(x, train=True)
        l_det, g_det = bce(det, labels)
        l_rec, g_rec = masked_mse(rec, targets, masks)
        lam = self.config.lambda_recover
        total = l_det + lam * l_rec
        if not np.isfinite(total):
            raise NonFiniteLoss(f"loss went non-finite (detection {l_det}, recovery {l_rec})")
        self.backward(g_det, lam * g_rec)
        return total, l_det, l_rec

    def round_to_float32(self):
        for t in self.state().values():
            t[...] = t.astype(np.float32)
        return self


def build_model(config):
    return StegModel(config)


# -- batching ---------------------------------------------------------------

def stack_batch(samples):
    x = np.stack([normalize(s.image) for s in samples])[:, None]
    labels = np.array([s.label for s in samples], dtype=np.float64)
    targets = np.stack([s.target for s in samples]).astype(np.float64)
    masks = np.stack([s.mask for s in samples]).astype(np.float64)
    return x, labels, targets, masks


@dataclass
class EpochStats:
    epoch: int
    total: float
    detection: float
    recovery: float


class Trainer:
    """Adam training with a seeded per-epoch shuffle.
    """

    def __init__(self, model, config):
        config.validate()
        self.model = model
        self.config = config
        self.opt = Adam(model.params(), lr=config.lr)
        self.rng = SplitMix64(config.seed)
        self.epoch = 0

    def train_epoch(self, samples):
        if not samples:
            raise EmptySplit("no training samples")
        order = self.rng.shuffle(list(range(len(samples))))
        sums = np.zeros(3)
        n = 0
        for start in range(0, len(order), self.config.batch):
            batch = [samples[i] for i in order[start:start + self.config.batch]]
            losses = self.model.loss_and_grad(*stack_batch(batch))
            self.opt.step(self.model.grads())
            sums += np.array(losses) * len(batch)
            n += len(batch)
        self.epoch += 1
        return EpochStats(self.epoch, *(float(v) for v in sums / n))

    def fit(self, samples, epochs=None, callback=None):
        """Run the epochs, then refresh batch-norm statistics for inference."""
        history = []
        for _ in range(self.config.epochs if epochs is None else epochs):
            stats = self.train_epoch(samples)
            history.append(stats)
            if callback:
                callback(stats)
        recalibrate_batchnorm(self.model, samples, self.config.batch)
        return history


def train_epoch(model, samples, trainer):
    return trainer.train_epoch(samples)


# -- evaluation --------------------------------------------------------------

@dataclass
class Evaluation:
    """Per-sample evaluation outputs, consumed by :mod:`stegoscope.metrics`."""

    scores: np.ndarray        # detection probabilities
    labels: np.ndarray
    bpp: np.ndarray
    bit_errors: np.ndarray    # mismatches under the mask, per sample
    bit_counts: np.ndarray    # popcount of the mask, per sample


def predict(model, samples, batch=32):
    det_all, rec_all = [], []
    for start in range(0, len(samples), batch):
        x = stack_batch(samples[start:start + batch])[0]
        det, rec = model.forward(x, train=False)
        det_all.append(det)
        rec_all.append(rec)
    return np.concatenate(det_all), np.concatenate(rec_all)


def evaluate(model, samples, batch=32):
    if not samples:
        raise EmptySplit("nothing to evaluate")
    scores = np.zeros(len(samples))
    errors = np.zeros(len(samples), dtype=np.int64)
    counts = np.zeros(len(samples), dtype=np.int64)
    for start in range(0, len(samples), batch):
        chunk = samples[start:start + batch]
        x = stack_batch(chunk)[0]
        det, rec = model.forward(x, train=False)
        scores[start:start + len(chunk)] = det
        for j, s in enumerate(chunk):
            m = s.mask.astype(bool)
            bits = rec[j] > 0.5
            errors[start + j] = int(np.count_nonzero(bits[m] != s.target[m].astype(bool)))
            counts[start + j] = int(m.sum())
    return Evaluation(scores, np.array([s.label for s in samples]),
                      np.array([s.bpp for s in samples], dtype=np.float64), errors, counts)


# -- gradient check ------------------------------------------------------------

def network_grad_check(model, x, labels, targets, masks):
    """Max relative error over input and all parameter gradients of the combined loss."""
    x = np.array(x, dtype=np.float64)
    buffers = model.buffers()
    saved = {k: v.copy() for k, v in buffers.items()}

    def restore():
        for k, v in saved.items():
            buffers[k][...] = v

    def loss():
        det, rec = model.forward(x, train=True)
        restore()
        return bce(det, labels)[0] + model.config.lambda_recover * masked_mse(rec, targets, masks)[0]

    det, rec = model.forward(x, train=True)
    restore()
    _, g_det = bce(det, labels)
    _, g_rec = masked_mse(rec, targets, masks)
    gx = model.backward(g_det, model.config.lambda_recover * g_rec)
    grads = model.grads()
    worst = rel_error(gx, numeric_grad(loss, x)).max()
    for name, p in model.params().items():
        worst = max(worst, rel_error(grads[name], numeric_grad(loss, p)).max())
    return float(worst)


# -- weight files ------------------------------------------------------------

def save_weights(model, path):
    """Write every parameter and buffer as little-endian float32 tensors."""
    tensors = model.state()
    out = [WEIGHTS_MAGIC, struct.pack("<HI", WEIGHTS_VERSION, len(tensors))]
    for name, t in tensors.items():
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", t.ndim))
        out.append(struct.pack(f"<{t.ndim}I", *t.shape))
        out.append(np.ascontiguousarray(t, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(out))


def read_weights(data):
    """Parse a weight file into an ordered ``{name: float64 array}``."""
    if data[:8] != WEIGHTS_MAGIC:
        raise BadMagic("not an APVDNN01 weight file")
    pos = 8

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise TruncatedData(f"weight file ends at byte {len(data)}, needed {pos + n}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    version, count = struct.unpack("<HI", take(6))
    if version != WEIGHTS_VERSION:
        raise VersionMismatch(f"weight file version {version}, expected {WEIGHTS_VERSION}")
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        n = int(np.prod(dims)) if rank else 1
        tensors[name] = np.frombuffer(take(4 * n), dtype="<f4").astype(np.float64).reshape(dims)
    return tensors


def config_from_tensors(tensors, **overrides):
    """Recover depth, channels and SE ratio from trunk tensor shapes."""
    ch = []
    i = 0
    while f"trunk.{i}.0.weight" in tensors:
        ch.append(tensors[f"trunk.{i}.0.weight"].shape[0])
        i += 1
    if not ch:
        raise ShapeMismatch("weight file has no trunk tensors")
    ratio = ch[0] // tensors["trunk.0.3.w_reduce"].shape[1]
    kw = dict(input_size=2 ** len(ch) * 8, depth=len(ch), block_channels=ch, se_ratio=ratio,
              highpass="front.0.kernel" in tensors)
    kw.update(overrides)
    return ModelConfig(**kw)


def load_weights(path, config=None):
    with open(path, "rb") as fh:
        tensors = read_weights(fh.read())
    model = StegModel(config or config_from_tensors(tensors))
    state = model.state()
    if set(state) != set(tensors):
        missing = sorted(set(state) ^ set(tensors))
        raise ShapeMismatch(f"weight file tensors do not match the model: {missing[:5]}")
    for name, t in tensors.items():
        if state[name].shape != t.shape:
            raise ShapeMismatch(f"{name}: file shape {t.shape}, model shape {state[name].shape}")
        state[name][...] = t
    return model


def recalibrate_batchnorm(model, samples, batch=32):
    """Replace running statistics with population averages under the current weights.

    Averages each batch-norm layer's batch mean and variance over one pass
    of ``samples`` in training mode; parameters are untouched.
    """
    layers = [l for part in (model.front, model.trunk) for l in _walk(part) if isinstance(l, BatchNorm2d)]
    saved = [(l.buffers["running_mean"].copy(), l.buffers["running_var"].copy()) for l in layers]
    sums = [[np.zeros_like(m), np.zeros_like(v)] for m, v in saved]
    n = 0
    for start in range(0, len(samples), batch):
        chunk = samples[start:start + batch]
        model.forward(stack_batch(chunk)[0], train=True)
        for acc, layer in zip(sums, layers):
            mean, var = layer.batch_stats
            acc[0] += mean * len(chunk)
            acc[1] += var * len(chunk)
        n += len(chunk)
    for (m_sum, v_sum), layer in zip(sums, layers):
        layer.buffers["running_mean"][...] = m_sum / n
        layer.buffers["running_var"][...] = v_sum / n


def _walk(layer):
    yield layer
    for sub in getattr(layer, "layers", []):
        yield from _walk(sub)
