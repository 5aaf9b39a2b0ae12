import struct

import numpy as np
import pytest

from stegoscope.dataset import build_sample, synthetic_covers
from stegoscope.errors import BadConfig, BadMagic, EmptySplit, ShapeMismatch, TruncatedData, VersionMismatch
from stegoscope.model import (ModelConfig, StegModel, TrainConfig, Trainer, evaluate, load_weights,
                              network_grad_check, full_profile, predict, read_weights, save_weights,
                              stack_batch)


def small(**kw):
    kw.setdefault("input_size", 32)
    kw.setdefault("depth", 2)
    kw.setdefault("block_channels", [4, 8])
    return ModelConfig(**kw)


@pytest.fixture(scope="module")
def samples32():
    out = []
    for i, (cid, c) in enumerate(synthetic_covers(4, 32, 3)):
        out += build_sample(c, 0.8, i, cid)
    return out


def test_output_shapes(samples32):
    m = StegModel(small())
    det, rec = m.forward(stack_batch(samples32[:3])[0])
    assert det.shape == (3,) and rec.shape == (3, 7, 32, 32)
    assert ((det > 0) & (det < 1)).all() and ((rec > 0) & (rec < 1)).all()


def test_default_and_full_profiles():
    assert ModelConfig().block_channels == [8, 16, 32]
    cfg = full_profile()
    assert (cfg.input_size, cfg.depth, cfg.block_channels) == (256, 5, [8, 16, 32, 64, 128])
    cfg.validate()


@pytest.mark.parametrize("kw", [dict(depth=0, block_channels=[]), dict(block_channels=[4]),
                                dict(block_channels=[4, 6]), dict(input_size=30)])
def test_bad_config(kw):
    with pytest.raises(BadConfig):
        StegModel(small(**kw))


def test_bad_input_shape():
    with pytest.raises(ShapeMismatch):
        StegModel(small()).forward(np.zeros((1, 1, 30, 30)))


def test_seeded_init():
    a, b, c = StegModel(small(seed=1)), StegModel(small(seed=1)), StegModel(small(seed=2))
    for k, v in a.params().items():
        assert np.array_equal(v, b.params()[k])
    assert any(not np.array_equal(v, c.params()[k]) for k, v in a.params().items())


def test_highpass_switch():
    assert "front.0.kernel" in StegModel(small()).buffers()
    assert not any(k.startswith("front.") for k in StegModel(small(highpass=False)).state())


def test_weight_roundtrip(tmp_path, samples32):
    m = StegModel(small(seed=4))
    Trainer(m, TrainConfig(batch=4)).fit(samples32, epochs=1)
    m.round_to_float32()
    save_weights(m, tmp_path / "w.bin")
    data = (tmp_path / "w.bin").read_bytes()
    assert data[:8] == b"APVDNN01"
    back = load_weights(tmp_path / "w.bin")
    assert back.config.block_channels == [4, 8] and back.config.highpass
    for k, v in m.state().items():
        assert np.array_equal(back.state()[k], v)
    x = stack_batch(samples32)[0]
    assert np.array_equal(predict(m, samples32)[0], predict(back, samples32)[0])
    assert np.array_equal(m.forward(x)[1], back.forward(x)[1])


def test_weight_file_errors(tmp_path):
    m = StegModel(small())
    save_weights(m, tmp_path / "w.bin")
    data = (tmp_path / "w.bin").read_bytes()
    with pytest.raises(BadMagic):
        read_weights(b"XXXXXXXX" + data[8:])
    with pytest.raises(TruncatedData):
        read_weights(data[:-3])
    with pytest.raises(VersionMismatch):
        read_weights(data[:8] + struct.pack("<H", 9) + data[10:])
    with pytest.raises(ShapeMismatch):
        load_weights(tmp_path / "w.bin", small(block_channels=[8, 8]))


def test_detection_loss_decreases_without_recovery(samples32):
    m = StegModel(small(lambda_recover=0.0))
    hist = Trainer(m, TrainConfig(batch=8, lr=0.003)).fit(samples32, epochs=5)
    det = [h.detection for h in hist]
    assert det[-1] < det[0]
    assert all(h.total == h.detection for h in hist)


def test_training_deterministic(samples32):
    runs = []
    for _ in range(2):
        m = StegModel(small(seed=7))
        hist = Trainer(m, TrainConfig(batch=4, seed=7)).fit(samples32, epochs=2)
        runs.append((hist, m.state()))
    assert runs[0][0] == runs[1][0]
    for k, v in runs[0][1].items():
        assert np.array_equal(v, runs[1][1][k])


def test_empty_training_split():
    with pytest.raises(EmptySplit):
        Trainer(StegModel(small()), TrainConfig()).train_epoch([])
    with pytest.raises(BadConfig):
        TrainConfig(batch=1).validate()


def test_untrained_ber_near_half(samples32):
    ev = evaluate(StegModel(small(seed=5)), samples32)
    n = ev.bit_counts.sum()
    assert n >= 4 * 819
    assert abs(ev.bit_errors.sum() / n - 0.5) < 0.05
    assert (ev.bit_counts[ev.labels == 0] == 0).all()


def generic_point(model, seed):
    """Give every bias a small random value.

    Zero-initialised biases put exactly-zero pre-activations behind dead ReLU
    regions, i.e. on the kink, where central differences return half a slope.
    """
    rng = np.random.default_rng(seed)
    for name, p in model.params().items():
        if name.endswith("bias") or ".b_" in name:
            p[...] = rng.normal(scale=0.1, size=p.shape)
    return model


@pytest.mark.parametrize("seed", [0, 3])
def test_network_grad_check(seed):
    m = generic_point(StegModel(ModelConfig(input_size=16, depth=2, block_channels=[4, 8], seed=seed)), seed)
    x = np.random.default_rng(0).uniform(size=(2, 1, 16, 16))
    targets = (np.random.default_rng(1).uniform(size=(2, 7, 16, 16)) > 0.5).astype(float)
    masks = np.zeros_like(targets)
    masks[1, :3, :, ::2] = 1
    assert network_grad_check(m, x, np.array([0.0, 1.0]), targets, masks) < 1e-4


def test_trunk_shape_depth3():
    m = StegModel(ModelConfig(input_size=64, depth=3))
    x = np.random.default_rng(2).uniform(size=(2, 1, 64, 64))
    assert m.trunk.forward(m.front.forward(x, False), False).shape == (2, 32, 8, 8)
    assert m.forward(x)[1].shape == (2, 7, 64, 64)


def test_duplicated_rows_match_in_infer_mode():
    m = StegModel(small(seed=9))
    row = np.random.default_rng(3).uniform(size=(1, 1, 32, 32))
    det, rec = m.forward(np.concatenate([row, row, row]))
    assert det[0] == det[1] == det[2] and np.array_equal(rec[0], rec[2])
