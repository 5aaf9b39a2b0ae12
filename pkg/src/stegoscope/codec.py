"""Adaptive pixel-value-differencing (APVD) embedding and extraction.

Pixels are taken in horizontal, non-overlapping pairs ``(r, 2c), (r, 2c+1)``.
The signed difference ``d = p2 - p1`` falls in one of six range bands; a pair
in band ``k`` carries ``t_k`` bits by re-quantising ``|d|`` inside the band.

Each pair is reduced to a *base pair* (its value-0 representative). The base
pair and band never change under embedding, and whether a pair can overflow
[0, 255] is decided from them alone, so embedder and extractor always agree
on which pairs are usable.

A 32-bit header (3-bit threshold index, 29-bit payload length) is written
into the first usable pairs so extraction needs nothing but the stego image
and the optional traversal key.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from .errors import CompositionOverflow, InsufficientCapacity, MalformedHeader, OddWidth
from .splitmix import SplitMix64

HEADER_BITS = 32
THRESHOLD_BITS = 3
LENGTH_BITS = 29
MAX_PAYLOAD = (1 << LENGTH_BITS) - 1
MAX_BITS_PER_PAIR = 7


class RangeBand(NamedTuple):
    index: int
    lower: int
    upper: int
    bits: int


BANDS = (
    RangeBand(0, 0, 7, 3),
    RangeBand(1, 8, 15, 3),
    RangeBand(2, 16, 31, 4),
    RangeBand(3, 32, 63, 5),
    RangeBand(4, 64, 127, 6),
    RangeBand(5, 128, 255, 7),
)
NUM_BANDS = len(BANDS)

_LOWER = np.array([b.lower for b in BANDS], dtype=np.int64)
_SPAN = np.array([b.upper - b.lower for b in BANDS], dtype=np.int64)
_BITS = np.array([b.bits for b in BANDS], dtype=np.int64)


def range_lookup(abs_diff):
    if not 0 <= abs_diff <= 255:
        raise ValueError(f"difference {abs_diff} outside [0, 255]")
    for band in BANDS:
        if abs_diff <= band.upper:
            return band


@dataclass(frozen=True)
class PairCode:
    base1: int
    base2: int
    epsilon: int
    band: RangeBand
    value: int


def pair_decompose(p1, p2):
    d = p2 - p1
    eps = -1 if d < 0 else 1
    band = range_lookup(abs(d))
    value = abs(d) - band.lower
    return PairCode(p1 + eps * (value // 2), p2 - eps * ((value + 1) // 2), eps, band, value)


def pair_compose(code, value=None):
    """Rebuild a pixel pair from ``code`` carrying ``value`` (defaults to ``code.value``)."""
    v = code.value if value is None else value
    span = code.band.upper - code.band.lower
    if not 0 <= v <= span:
        raise ValueError(f"value {v} outside band {code.band.index} range [0, {span}]")
    p1 = code.base1 - code.epsilon * (v // 2)
    p2 = code.base2 + code.epsilon * ((v + 1) // 2)
    if not (0 <= p1 <= 255 and 0 <= p2 <= 255):
        raise CompositionOverflow(f"value {v} composes to ({p1}, {p2})")
    return p1, p2


def is_abnormal(p1, p2):
    return bool(_abnormal(*_decompose(np.array([p1]), np.array([p2])))[0])


# -- vectorised core -------------------------------------------------------

def _decompose(p1, p2):
    p1 = np.asarray(p1, dtype=np.int64)
    p2 = np.asarray(p2, dtype=np.int64)
    d = p2 - p1
    eps = np.where(d < 0, -1, 1)
    a = np.abs(d)
    band = np.searchsorted(_LOWER, a, side="right") - 1
    value = a - _LOWER[band]
    return p1 + eps * (value // 2), p2 - eps * ((value + 1) // 2), eps, band


def _compose(base1, base2, eps, value):
    return base1 - eps * (value // 2), base2 + eps * ((value + 1) // 2)


def _overflows(q1, q2):
    return (q1 < 0) | (q1 > 255) | (q2 < 0) | (q2 > 255)


def _abnormal(base1, base2, eps, band):
    span = _SPAN[band]
    bad = _overflows(*_compose(base1, base2, eps, span))
    # at d == 0 the sign is a convention, so band 0 must survive both orientations
    flipped = _overflows(*_compose(base1, base2, -eps, span))
    return bad | ((band == 0) & flipped)


def _values_to_bits(values, nbits):
    """Expand per-pair integers into a flat MSB-first bit array."""
    pos = np.arange(nbits.sum()) - np.repeat(np.cumsum(nbits) - nbits, nbits)
    shift = np.repeat(nbits, nbits) - 1 - pos
    return ((np.repeat(values, nbits) >> shift) & 1).astype(np.uint8)


def _bits_to_values(bits, nbits):
    starts = np.cumsum(nbits) - nbits
    pos = np.arange(nbits.sum()) - np.repeat(starts, nbits)
    weights = np.left_shift(1, np.repeat(nbits, nbits) - 1 - pos)
    return np.add.reduceat(bits.astype(np.int64) * weights, starts)


def _int_to_bits(x, width):
    return np.array([(x >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def _bits_to_int(bits):
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def as_bits(payload):
    bits = np.asarray(payload, dtype=np.uint8).ravel()
    if bits.size and bits.max() > 1:
        raise ValueError("payload must contain only 0/1 values")
    return bits


# -- traversal -------------------------------------------------------------

@lru_cache(maxsize=64)
def _order(width, height, key):
    n = height * (width // 2)
    if key is None:
        order = np.arange(n)
    else:
        order = np.array(SplitMix64(key).shuffle(list(range(n))))
    order.setflags(write=False)
    return order


def _pair_order(width, height, key):
    if width % 2:
        raise OddWidth(f"width {width} is odd; pairs need an even width")
    return _order(width, height, None if key is None else int(key))


def traversal_order(width, height, key=None):
    """Pair coordinates ``(row, pair_col)`` in embedding order."""
    half = width // 2
    return [(int(i) // half, int(i) % half) for i in _pair_order(width, height, key)]


# -- layout ----------------------------------------------------------------

@dataclass
class _Layout:
    order: np.ndarray       # flat pair indices in traversal order
    p1: np.ndarray
    p2: np.ndarray
    base1: np.ndarray
    base2: np.ndarray
    eps: np.ndarray
    band: np.ndarray
    header: np.ndarray      # positions (into ``order``) of header pairs
    usable: np.ndarray      # positions of non-abnormal pairs after the header

    def payload_positions(self, tau):
        return self.usable[self.band[self.usable] >= tau]

    def capacities(self):
        """Capacity for every threshold index 0..5."""
        per_band = np.bincount(self.band[self.usable], weights=_BITS[self.band[self.usable]],
                               minlength=NUM_BANDS).astype(np.int64)
        return np.cumsum(per_band[::-1])[::-1]


def _layout(image, key):
    img = np.asarray(image)
    h, w = img.shape
    order = _pair_order(w, h, key)
    flat = img.reshape(h, w // 2, 2).reshape(-1, 2).astype(np.int64)
    p1 = flat[order, 0]
    p2 = flat[order, 1]
    base1, base2, eps, band = _decompose(p1, p2)
    normal = np.flatnonzero(~_abnormal(base1, base2, eps, band))
    cum = np.cumsum(_BITS[band[normal]])
    n_header = int(np.searchsorted(cum, HEADER_BITS)) + 1
    if n_header > len(normal):
        header = normal[:0]
        usable = normal[:0]
    else:
        header = normal[:n_header]
        usable = normal[n_header:]
    return _Layout(order, p1, p2, base1, base2, eps, band, header, usable)


def capacity(image, threshold_index, key=None):
    """Payload bits available at ``threshold_index`` once the header is placed.

    The key matters only through which pairs the header lands on.
    """
    if not 0 <= threshold_index < NUM_BANDS:
        return 0
    lay = _layout(image, key)
    if len(lay.header) == 0:
        return 0
    return int(lay.capacities()[threshold_index])


def _select(lay, payload_bits):
    caps = lay.capacities() if len(lay.header) else np.zeros(NUM_BANDS, dtype=np.int64)
    if len(lay.header) == 0 or caps[0] < payload_bits:
        raise InsufficientCapacity(payload_bits, int(caps[0]))
    return int(np.flatnonzero(caps >= payload_bits)[-1])


def select_threshold(image, payload_bits, key=None):
    """Largest threshold index whose capacity still holds ``payload_bits``."""
    if payload_bits < 0:
        raise ValueError("payload_bits must be non-negative")
    return _select(_layout(image, key), payload_bits)


# -- embed / extract -------------------------------------------------------

@dataclass
class EmbedTrace:
    """Where each payload bit went.

    Pair ``i`` sits at ``(rows[i], pair_cols[i])`` and carries payload bits
    ``payload[offsets[i]:offsets[i] + counts[i]]`` in its top ``counts[i]``
    bit positions (MSB first). Header pairs are not listed.
    """

    rows: np.ndarray
    pair_cols: np.ndarray
    counts: np.ndarray
    offsets: np.ndarray
    payload: np.ndarray
    threshold_index: int
    height: int
    width: int

    def __len__(self):
        return len(self.rows)

    def entries(self):
        for r, c, n, o in zip(self.rows, self.pair_cols, self.counts, self.offsets):
            yield (int(r), int(c)), list(range(n)), self.payload[o:o + n].tolist()


def _write(lay, positions, bits, out):
    """Write ``bits`` (zero-padded to fill the slots) into pairs at ``positions``."""
    nbits = _BITS[lay.band[positions]]
    slots = np.zeros(int(nbits.sum()), dtype=np.uint8)
    slots[:len(bits)] = bits
    values = _bits_to_values(slots, nbits)
    q1, q2 = _compose(lay.base1[positions], lay.base2[positions], lay.eps[positions], values)
    flat = out.reshape(-1, 2)
    idx = lay.order[positions]
    flat[idx, 0] = q1
    flat[idx, 1] = q2


def _read(lay, positions):
    band = lay.band[positions]
    values = np.abs(lay.p2[positions] - lay.p1[positions]) - _LOWER[band]
    return _values_to_bits(values, _BITS[band])


def embed(cover, payload, key=None):
    """Hide ``payload`` (a 0/1 sequence) in ``cover``; returns ``(stego, trace)``."""
    cover = np.asarray(cover, dtype=np.uint8)
    if cover.ndim != 2:
        raise ValueError("cover must be a 2-D grayscale image")
    bits = as_bits(payload)
    if len(bits) > MAX_PAYLOAD:
        raise ValueError(f"payload of {len(bits)} bits exceeds the 29-bit length field")
    lay = _layout(cover, key)
    tau = _select(lay, len(bits))

    stego = cover.copy()
    header = np.concatenate([_int_to_bits(tau, THRESHOLD_BITS), _int_to_bits(len(bits), LENGTH_BITS)])
    _write(lay, lay.header, header, stego)

    eligible = lay.payload_positions(tau)
    cum = np.cumsum(_BITS[lay.band[eligible]])
    used = eligible[:int(np.searchsorted(cum, len(bits))) + 1] if len(bits) else eligible[:0]
    if len(used):
        _write(lay, used, bits, stego)

    counts = _BITS[lay.band[used]]
    offsets = np.cumsum(counts) - counts
    counts = np.minimum(counts, len(bits) - offsets)
    half = cover.shape[1] // 2
    idx = lay.order[used]
    trace = EmbedTrace(idx // half, idx % half, counts, offsets, bits, tau, *cover.shape)
    return stego, trace


def extract(stego, key=None):
    """Recover the payload bits from ``stego``."""
    stego = np.asarray(stego, dtype=np.uint8)
    lay = _layout(stego, key)
    if len(lay.header) == 0:
        raise MalformedHeader("image cannot hold a header")
    header = _read(lay, lay.header)[:HEADER_BITS]
    tau = _bits_to_int(header[:THRESHOLD_BITS])
    length = _bits_to_int(header[THRESHOLD_BITS:])
    if tau >= NUM_BANDS:
        raise MalformedHeader(f"threshold index {tau} out of range")
    avail = int(lay.capacities()[tau])
    if length > avail:
        raise MalformedHeader(f"header claims {length} bits but only {avail} fit at threshold {tau}")
    if length == 0:
        return np.zeros(0, dtype=np.uint8)
    eligible = lay.payload_positions(tau)
    cum = np.cumsum(_BITS[lay.band[eligible]])
    used = eligible[:int(np.searchsorted(cum, length)) + 1]
    return _read(lay, used)[:length]
