import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import reference_codec as ref
from stegoscope import codec
from stegoscope.codec import (BANDS, PairCode, capacity, embed, extract, is_abnormal, pair_compose,
                              pair_decompose, range_lookup, select_threshold, traversal_order)
from stegoscope.errors import CompositionOverflow, InsufficientCapacity, MalformedHeader, OddWidth
from stegoscope.image_io import synth_cover


def test_bands_partition_0_255():
    covered = []
    for b in BANDS:
        assert b.bits == (b.upper - b.lower + 1).bit_length() - 1
        covered += range(b.lower, b.upper + 1)
    assert covered == list(range(256))
    assert [b.bits for b in BANDS] == [3, 3, 4, 5, 6, 7]


@pytest.mark.parametrize("d, idx", [(0, 0), (7, 0), (8, 1), (10, 1), (15, 1), (16, 2), (127, 4), (128, 5), (255, 5)])
def test_range_lookup(d, idx):
    assert range_lookup(d).index == idx


def test_range_lookup_rejects_out_of_domain():
    with pytest.raises(ValueError):
        range_lookup(256)


def test_decompose_examples():
    c = pair_decompose(100, 110)
    assert (c.epsilon, c.band.index, c.value, c.base1, c.base2) == (1, 1, 2, 101, 109)
    c = pair_decompose(110, 100)
    assert (c.epsilon, c.band.index, c.value, c.base1, c.base2) == (-1, 1, 2, 109, 101)
    c = pair_decompose(50, 50)
    assert (c.epsilon, c.band.index, c.value, c.base1, c.base2) == (1, 0, 0, 50, 50)


def test_compose_examples():
    assert pair_compose(PairCode(101, 109, 1, BANDS[1], 2), 5) == (99, 112)
    assert pair_compose(PairCode(50, 50, 1, BANDS[0], 0), 0) == (50, 50)
    assert pair_compose(PairCode(63, 191, 1, BANDS[5], 0), 127) == (0, 255)


def test_compose_overflow_raises():
    code = pair_decompose(1, 252)
    with pytest.raises(CompositionOverflow):
        pair_compose(code, 127)


def test_decompose_compose_roundtrip_all_pairs():
    for p1 in range(256):
        for p2 in range(0, 256, 3):
            assert pair_compose(pair_decompose(p1, p2)) == (p1, p2)


@pytest.mark.parametrize("pair, expected", [((2, 252), False), ((1, 252), True), ((128, 128), False),
                                            ((3, 3), True), ((4, 4), False), ((251, 251), False),
                                            ((252, 252), True)])
def test_is_abnormal_examples(pair, expected):
    assert is_abnormal(*pair) is expected


def _abnormal_bruteforce(p1, p2):
    code = pair_decompose(p1, p2)
    span = code.band.upper - code.band.lower
    signs = (1, -1) if code.band.index == 0 else (code.epsilon,)
    for eps in signs:
        for v in range(span + 1):
            q1 = code.base1 - eps * (v // 2)
            q2 = code.base2 + eps * ((v + 1) // 2)
            if not (0 <= q1 <= 255 and 0 <= q2 <= 255):
                return True
    return False


def test_is_abnormal_matches_bruteforce_sample():
    rng = np.random.default_rng(1)
    for p1, p2 in rng.integers(0, 256, size=(3000, 2)):
        assert is_abnormal(int(p1), int(p2)) == _abnormal_bruteforce(int(p1), int(p2))


def test_traversal_raster():
    assert traversal_order(4, 2) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_traversal_keyed_is_deterministic_permutation():
    a = traversal_order(8, 6, key=12345)
    assert a == traversal_order(8, 6, key=12345)
    assert sorted(a) == traversal_order(8, 6)
    assert a != traversal_order(8, 6, key=12346)


def test_odd_width_rejected():
    with pytest.raises(OddWidth):
        traversal_order(5, 2)
    with pytest.raises(OddWidth):
        embed(np.zeros((4, 5), np.uint8), [1])


def test_capacity_constant_image(flat128):
    assert capacity(flat128, 0) == (2048 - 11) * 3 == 6111
    assert capacity(flat128, 1) == 0


def test_capacity_matches_reference(noise_cover):
    small = noise_cover[:16, :24]
    for tau in range(6):
        assert capacity(small, tau) == ref.capacity(small, tau)
        assert capacity(small, tau, key=99) == ref.capacity(small, tau, key=99)


def test_select_threshold(flat128, noise_cover):
    assert select_threshold(flat128, 1000) == 0
    with pytest.raises(InsufficientCapacity) as info:
        select_threshold(flat128, 6112)
    assert info.value.available == 6111
    assert select_threshold(noise_cover, 0) == 5
    caps = [capacity(noise_cover, t) for t in range(6)]
    tau = select_threshold(noise_cover, 200)
    assert caps[tau] >= 200 and all(caps[t] < 200 for t in range(tau + 1, 6))


def test_embed_pair_example():
    cover = np.full((2, 32), 128, dtype=np.uint8)
    cover[1, 0:2] = (100, 110)              # row 0 (16 pairs, 48 slots) holds the header
    stego, trace = embed(cover, [1, 0, 1])
    assert tuple(stego[1, 0:2]) == (99, 112)
    assert list(trace.entries()) == [((1, 0), [0, 1, 2], [1, 0, 1])]
    assert extract(stego).tolist() == [1, 0, 1]


def test_empty_payload_touches_only_header(flat128):
    stego, trace = embed(flat128, [])
    assert len(trace) == 0
    assert extract(stego).size == 0
    changed = np.flatnonzero((stego != flat128).reshape(-1, 2).any(axis=1))
    assert changed.size == 0 or changed.max() < 11


def test_embed_matches_reference_codec(noise_cover):
    img = noise_cover[:32, :32]
    rng = np.random.default_rng(3)
    for key in (None, 77):
        bits = rng.integers(0, 2, 900).astype(np.uint8)
        stego, _ = embed(img, bits, key=key)
        assert np.array_equal(stego, ref.embed(img, bits, key=key))
        assert ref.extract(stego, key=key) == bits.tolist()


def test_locality_and_distortion(noise_cover):
    bits = np.random.default_rng(0).integers(0, 2, 3000)
    stego, trace = embed(noise_cover, bits)
    diff = np.abs(stego.astype(int) - noise_cover.astype(int))
    touched = np.zeros((64, 32), bool)
    touched[trace.rows, trace.pair_cols] = True
    lay = codec._layout(noise_cover, None)
    touched.ravel()[lay.order[lay.header]] = True
    assert not diff.reshape(64, 32, 2)[~touched].any()
    for r, c in zip(*np.nonzero(touched)):
        band = pair_decompose(int(noise_cover[r, 2 * c]), int(noise_cover[r, 2 * c + 1])).band
        assert diff[r, 2 * c:2 * c + 2].max() <= -(-(band.upper - band.lower) // 2)


def test_extract_wrong_key_does_not_return_payload(noise_cover):
    bits = np.random.default_rng(4).integers(0, 2, 2000)
    stego, _ = embed(noise_cover, bits, key=1)
    try:
        out = extract(stego, key=2)
    except MalformedHeader:
        return
    assert not np.array_equal(out, bits)


def test_malformed_header_on_textured_cover():
    failures = 0
    for seed in range(20):
        img = synth_cover(seed, 64, 64, "value-noise")
        try:
            extract(img)
        except MalformedHeader:
            failures += 1
    assert failures >= 18


def test_payload_length_limit(flat128):
    with pytest.raises(ValueError):
        embed(flat128, np.zeros(2**29, np.uint8))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), kind=st.sampled_from(["gradient", "blended-sinusoid", "value-noise"]),
       frac=st.floats(0.0, 1.0), key=st.one_of(st.none(), st.integers(0, 2**64 - 1)))
def test_roundtrip_property(seed, kind, frac, key):
    img = synth_cover(seed, 32, 16, kind)
    n = int(frac * capacity(img, 0, key=key))
    bits = np.random.default_rng(seed).integers(0, 2, n).astype(np.uint8)
    stego, trace = embed(img, bits, key=key)
    assert np.array_equal(extract(stego, key=key), bits)
    assert sum(trace.counts) == n
    assert np.array_equal(embed(img, bits, key=key)[0], stego)
