"""Grayscale image plumbing: binary PGM, resizing, normalisation, synthetic covers.

Images are plain ``uint8`` arrays of shape ``(height, width)``.
"""

import re

import numpy as np

from .errors import BadMagic, OddWidth, TruncatedData, UnsupportedMaxval
from .splitmix import SplitMix64

_TOKEN = re.compile(rb"(?:\s|#[^\n\r]*)*(\S+)")

SYNTH_KINDS = ("gradient", "blended-sinusoid", "value-noise")


def as_image8(pixels):
    img = np.asarray(pixels)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"expected a non-empty 2-D image, got shape {img.shape}")
    if img.dtype != np.uint8:
        if img.min() < 0 or img.max() > 255:
            raise ValueError("pixel values must lie in [0, 255]")
        img = img.astype(np.uint8)
    return img


def read_pgm(data):
    """Parse a binary (P5) PGM byte string into a ``uint8`` array."""
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise TruncatedData("PGM header ends early")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P5":
        raise BadMagic(f"not a binary PGM (magic {fields[0][:8]!r})")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError as exc:
        raise BadMagic(f"malformed PGM header: {exc}") from None
    if maxval > 255:
        raise UnsupportedMaxval(f"maxval {maxval} needs 16-bit samples")
    if width < 1 or height < 1 or maxval < 1:
        raise BadMagic("PGM dimensions and maxval must be positive")
    # exactly one whitespace byte separates maxval from the raster
    pos += 1
    raster = data[pos:pos + width * height]
    if len(raster) < width * height:
        raise TruncatedData(f"expected {width * height} pixels, found {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(image):
    img = as_image8(image)
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def load_pgm(path):
    with open(path, "rb") as fh:
        return read_pgm(fh.read())


def save_pgm(path, image):
    with open(path, "wb") as fh:
        fh.write(write_pgm(image))


def resize_bilinear(image, out_w, out_h):
    """Center-aligned bilinear resampling with clamped edges, rounded half up."""
    img = as_image8(image).astype(np.float64)
    h, w = img.shape
    if out_w < 1 or out_h < 1:
        raise ValueError("output size must be positive")
    if (out_w, out_h) == (w, h):
        return img.astype(np.uint8)
    sx = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0, w - 1)
    sy = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0, h - 1)
    x0 = np.floor(sx).astype(int)
    y0 = np.floor(sy).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[None, :]
    fy = (sy - y0)[:, None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bottom = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def normalize(image):
    return as_image8(image).astype(np.float64) / 255.0


def _isin(deg):
    """Integer sine scaled by 4096 for integer degrees (Bhaskara I approximation)."""
    deg = np.mod(deg, 360)
    sign = np.where(deg >= 180, -1, 1)
    x = np.where(deg >= 180, deg - 180, deg)
    t = x * (180 - x)
    return sign * (4 * t * 4096 // (40500 - t))


def _lattice_noise(rng, width, height, cell, amplitude):
    """Bilinear value noise on a lattice of spacing ``cell``, fixed point throughout."""
    gh = height // cell + 2
    gw = width // cell + 2
    grid = (rng.u64_array(gh * gw) % np.uint64(2 * amplitude + 1)).astype(np.int64) - amplitude
    grid = grid.reshape(gh, gw)
    ys = np.arange(height)
    xs = np.arange(width)
    gy, fy = ys // cell, (ys % cell) * 256 // cell
    gx, fx = xs // cell, (xs % cell) * 256 // cell
    fy = fy[:, None]
    fx = fx[None, :]
    g00 = grid[gy][:, gx]
    g01 = grid[gy][:, gx + 1]
    g10 = grid[gy + 1][:, gx]
    g11 = grid[gy + 1][:, gx + 1]
    top = g00 * (256 - fx) + g01 * fx
    bottom = g10 * (256 - fx) + g11 * fx
    return (top * (256 - fy) + bottom * fy) // 65536


def synth_cover(seed, width, height, kind="value-noise"):
    """Deterministic synthetic grayscale cover using integer arithmetic only.

    ``gradient`` is a horizontal ramp ``min(col, 255)``; ``blended-sinusoid``
    mixes two seeded integer sinusoids; ``value-noise`` is smooth lattice noise
    with patches of fine, high-contrast texture, so it has both smooth and
    busy regions.
    """
    if width % 2:
        raise OddWidth(f"width {width} is odd")
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown cover kind {kind!r}")
    rows = np.arange(height, dtype=np.int64)[:, None]
    cols = np.arange(width, dtype=np.int64)[None, :]
    if kind == "gradient":
        return np.broadcast_to(np.minimum(cols, 255), (height, width)).astype(np.uint8)

    rng = SplitMix64(seed)
    if kind == "blended-sinusoid":
        fx1, fy1, fx2, fy2 = (1 + int(rng.below(3)) for _ in range(4))
        ph1, ph2 = int(rng.below(360)), int(rng.below(360))
        a = _isin(360 * fx1 * cols // width + 360 * fy1 * rows // height + ph1)
        b = _isin(360 * fx2 * cols // width - 360 * fy2 * rows // height + ph2)
        img = 128 + (a * 60 + b * 40) // 4096
    else:
        smooth = _lattice_noise(rng, width, height, 32, 70) + _lattice_noise(rng, width, height, 8, 12)
        # busy texture only where a second coarse field is high, roughly a quarter of the area
        busy = _lattice_noise(rng, width, height, 16, 64) > 24
        img = 128 + smooth + busy * _lattice_noise(rng, width, height, 2, 16)
    return np.clip(img, 8, 247).astype(np.uint8)
