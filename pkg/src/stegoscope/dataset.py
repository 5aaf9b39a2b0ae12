"""Corpus construction: payloads, cover/stego samples, bit targets and splits."""

import csv
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import codec
from .errors import EmptyCorpus, InsufficientCapacity
from .image_io import load_pgm, resize_bilinear, save_pgm, synth_cover, SYNTH_KINDS
from .splitmix import SplitMix64, splitmix64_next, splitmix64_stream  # noqa: F401

SPLITS = ("train", "val", "test")
DEFAULT_RATIOS = (0.70, 0.15, 0.15)
DEFAULT_BPP = (0.2, 0.5, 0.8)
MANIFEST_FIELDS = ("cover_path", "stego_path", "payload_path", "bpp", "seed", "split")
TARGET_CHANNELS = codec.MAX_BITS_PER_PAIR


def gen_payload(seed, nbits):
    """``nbits`` pseudo-random bits, MSB first from successive SplitMix64 draws."""
    if nbits < 0:
        raise ValueError("nbits must be non-negative")
    words = splitmix64_stream(seed, (nbits + 63) // 64)
    return np.unpackbits(words.astype(">u8").view(np.uint8))[:nbits]


def payload_length(bpp, height, width):
    # Python's round() is half-to-even; that is the pinned rule
    return int(round(bpp * height * width))


def make_target_map(trace, height, width):
    """Scatter the trace's payload bits into ``(7, H, W)`` target and mask arrays.

    Bit ``i`` (MSB first) of the pair at ``(r, c)`` lands on channel ``i``,
    row ``r``, column ``2c``.
    """
    target = np.zeros((TARGET_CHANNELS, height, width), dtype=np.uint8)
    mask = np.zeros_like(target)
    if len(trace) == 0:
        return target, mask
    counts = np.asarray(trace.counts)
    chan = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    rows = np.repeat(trace.rows, counts)
    cols = 2 * np.repeat(trace.pair_cols, counts)
    src = np.repeat(trace.offsets, counts) + chan
    target[chan, rows, cols] = trace.payload[src]
    mask[chan, rows, cols] = 1
    return target, mask


def read_target_bits(target, mask, trace):
    """Read bits back out of a target map in trace (embedding) order."""
    counts = np.asarray(trace.counts)
    chan = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    rows = np.repeat(trace.rows, counts)
    cols = 2 * np.repeat(trace.pair_cols, counts)
    assert mask[chan, rows, cols].all()
    return target[chan, rows, cols]


@dataclass
class Sample:
    cover_id: str
    image: np.ndarray
    payload: np.ndarray
    bpp: float
    target: np.ndarray
    mask: np.ndarray
    label: int            # 1 = stego, 0 = cover
    split: Optional[str] = None

    @property
    def is_stego(self):
        return self.label == 1


def build_sample(cover, bpp, payload_seed, cover_id="", key=None, split=None):
    """Return ``(cover_sample, stego_sample)`` for one cover at ``bpp``."""
    cover = np.asarray(cover, dtype=np.uint8)
    h, w = cover.shape
    payload = gen_payload(payload_seed, payload_length(bpp, h, w))
    stego, trace = codec.embed(cover, payload, key=key)
    target, mask = make_target_map(trace, h, w)
    empty = np.zeros_like(target)
    return (
        Sample(cover_id, cover, np.zeros(0, np.uint8), bpp, empty, empty.copy(), 0, split),
        Sample(cover_id, stego, payload, bpp, target, mask, 1, split),
    )


def split_manifest(sample_ids, ratios=DEFAULT_RATIOS, seed=0):
    """Assign each cover id to train/val/test by seeded shuffle and contiguous cut.

    Cuts fall at ``round(r0 * n)`` and ``round((r0 + r1) * n)``.
    """
    ids = list(sample_ids)
    if not ids:
        raise EmptyCorpus("no samples to split")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios {ratios} do not sum to 1")
    SplitMix64(seed).shuffle(ids)
    n = len(ids)
    a = round(ratios[0] * n)
    b = round((ratios[0] + ratios[1]) * n)
    out = {}
    for i, sid in enumerate(ids):
        out[sid] = SPLITS[0] if i < a else SPLITS[1] if i < b else SPLITS[2]
    return out


# -- on-disk corpus --------------------------------------------------------

@dataclass
class ManifestRow:
    cover_path: str
    stego_path: str
    payload_path: str
    bpp: float
    seed: int
    split: str


def write_manifest(path, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(MANIFEST_FIELDS)
        for r in rows:
            wr.writerow([r.cover_path, r.stego_path, r.payload_path, f"{r.bpp:g}", r.seed, r.split])


def read_manifest(path):
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != MANIFEST_FIELDS:
            raise ValueError(f"{path}: unexpected manifest header {rd.fieldnames}")
        return [ManifestRow(r["cover_path"], r["stego_path"], r["payload_path"],
                            float(r["bpp"]), int(r["seed"]), r["split"]) for r in rd]


def write_payload(path, bits):
    """Raw bytes (MSB first, zero padded) plus a ``.bits`` sidecar with the length."""
    bits = codec.as_bits(bits)
    with open(path, "wb") as fh:
        fh.write(np.packbits(bits).tobytes())
    with open(str(path) + ".bits", "w") as fh:
        fh.write(f"{len(bits)}\n")


def read_payload(path, nbits=None):
    if nbits is None:
        with open(str(path) + ".bits") as fh:
            nbits = int(fh.read().strip())
    with open(path, "rb") as fh:
        raw = np.frombuffer(fh.read(), dtype=np.uint8)
    bits = np.unpackbits(raw)
    if len(bits) < nbits:
        raise ValueError(f"{path}: {len(bits)} bits on disk, {nbits} requested")
    return bits[:nbits]


def derive_seed(seed, index):
    state = int(seed)
    for _ in range(2):
        state, out = splitmix64_next(state ^ index)
    return out >> 1   # keep it positive in signed 64-bit consumers


def load_cover_dir(directory, size):
    paths = sorted(Path(directory).glob("*.pgm"))
    covers = []
    for p in paths:
        img = load_pgm(p)
        covers.append((p.stem, resize_bilinear(img, size, size)))
    return covers


def synthetic_covers(n, size, seed):
    return [(f"synth{i:05d}", synth_cover(derive_seed(seed, i), size, size, SYNTH_KINDS[i % 3]))
            for i in range(n)]


def generate_corpus(out_dir, covers, bpp_list=DEFAULT_BPP, seed=0, key=None,
                    ratios=DEFAULT_RATIOS, on_capacity_error="abort", log=None):
    """Write covers, stegos, payloads and ``manifest.csv`` under ``out_dir``.

    ``covers`` is a list of ``(cover_id, image)``; cover ``i`` gets one stego at
    ``bpp_list[i % len(bpp_list)]``. Returns the manifest rows.
    """
    if not covers:
        raise EmptyCorpus("no cover images")
    out = Path(out_dir)
    for sub in ("covers", "stegos", "payloads"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    splits = split_manifest([cid for cid, _ in covers], ratios, seed)
    rows = []
    for i, (cid, img) in enumerate(covers):
        bpp = float(bpp_list[i % len(bpp_list)])
        pseed = derive_seed(seed, 1_000_003 + i)
        h, w = img.shape
        payload = gen_payload(pseed, payload_length(bpp, h, w))
        try:
            stego, _ = codec.embed(img, payload, key=key)
        except InsufficientCapacity as exc:
            if on_capacity_error == "skip":
                if log:
                    log(f"skipping {cid}: {exc}")
                continue
            raise
        row = ManifestRow(f"covers/{cid}.pgm", f"stegos/{cid}.pgm", f"payloads/{cid}.bin",
                          bpp, pseed, splits[cid])
        save_pgm(out / row.cover_path, img)
        save_pgm(out / row.stego_path, stego)
        write_payload(out / row.payload_path, payload)
        rows.append(row)
    if not rows:
        raise EmptyCorpus("every cover was skipped")
    write_manifest(out / "manifest.csv", rows)
    return rows


def load_samples(manifest_path, split=None, key=None):
    """Rebuild cover and stego :class:`Sample` objects from a manifest.

    Target maps are regenerated by re-embedding; the result must reproduce
    the stored stego image exactly.
    """
    base = os.path.dirname(os.path.abspath(manifest_path))
    samples = []
    for row in read_manifest(manifest_path):
        if split is not None and row.split != split:
            continue
        cover = load_pgm(os.path.join(base, row.cover_path))
        stego = load_pgm(os.path.join(base, row.stego_path))
        payload = read_payload(os.path.join(base, row.payload_path))
        rebuilt, trace = codec.embed(cover, payload, key=key)
        if not np.array_equal(rebuilt, stego):
            raise ValueError(f"{row.stego_path}: stego does not match its cover and payload")
        h, w = cover.shape
        target, mask = make_target_map(trace, h, w)
        empty = np.zeros_like(target)
        cid = Path(row.cover_path).stem
        samples.append(Sample(cid, cover, np.zeros(0, np.uint8), row.bpp, empty, empty.copy(), 0, row.split))
        samples.append(Sample(cid, stego, payload, row.bpp, target, mask, 1, row.split))
    return samples
