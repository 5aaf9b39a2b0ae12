"""stegoscope: an APVD steganography codec plus a small numpy steganalysis lab."""

from .codec import (BANDS, EmbedTrace, PairCode, RangeBand, capacity, embed, extract, is_abnormal,
                    pair_compose, pair_decompose, range_lookup, select_threshold, traversal_order)
from .errors import StegoscopeError
from .image_io import normalize, read_pgm, resize_bilinear, synth_cover, write_pgm

__version__ = "0.1.0"
