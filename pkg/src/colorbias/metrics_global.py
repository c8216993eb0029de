"""Global color bias: per-channel value distributions over all pixels.

Every pixel of every image contributes one count per channel. Binning:

* R, G, B: 256 unit bins, the channel value itself.
* L*: 101 unit bins, round half up to the nearest integer in [0, 100].
* a*, b*: 256 unit bins covering [-128, 128), ``floor(v) + 128`` clipped.

Lab values are first rounded to 9 decimals so that floating-point noise
(neutral grays come out at b* = -1e-14, say) cannot push a value across a
bin edge.

Counts are int64 and merge by addition, so the result does not depend on
the order or schedule in which images are processed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .color import rgb_to_lab_array

CHANNELS = ("R", "G", "B", "L*", "a*", "b*")

LAB_SNAP_DECIMALS = 9

N_BINS = {"R": 256, "G": 256, "B": 256, "L*": 101, "a*": 256, "b*": 256}


def bin_values(channel: str) -> np.ndarray:
    """Channel value represented by each bin (the bin's lower edge for a*/b*)."""
    if channel in ("R", "G", "B"):
        return np.arange(256, dtype=np.float64)
    if channel == "L*":
        return np.arange(101, dtype=np.float64)
    return np.arange(-128, 128, dtype=np.float64)


def lab_bin_indices(lab: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bin indices for the L*, a*, b* components of an (..., 3) Lab array."""
    lab = np.round(lab, LAB_SNAP_DECIMALS)
    li = np.clip(np.floor(lab[..., 0] + 0.5), 0, 100).astype(np.intp)
    ai = np.clip(np.floor(lab[..., 1]) + 128, 0, 255).astype(np.intp)
    bi = np.clip(np.floor(lab[..., 2]) + 128, 0, 255).astype(np.intp)
    return li, ai, bi


@dataclass
class ChannelHistogram:
    channel: str
    counts: np.ndarray

    @classmethod
    def empty(cls, channel: str) -> "ChannelHistogram":
        return cls(channel, np.zeros(N_BINS[channel], dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def bin_values(self) -> np.ndarray:
        return bin_values(self.channel)

    def __iadd__(self, other: "ChannelHistogram") -> "ChannelHistogram":
        if other.channel != self.channel:
            raise ValueError(f"cannot merge {other.channel} into {self.channel}")
        self.counts += other.counts
        return self

    def to_dict(self) -> dict:
        return {"channel": self.channel, "counts": [int(c) for c in self.counts], "total": self.total}

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelHistogram":
        return cls(d["channel"], np.asarray(d["counts"], dtype=np.int64))


@dataclass
class ChannelDelta:
    channel: str
    delta: np.ndarray

    def to_dict(self) -> dict:
        return {"channel": self.channel, "delta": [float(v) for v in self.delta]}

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelDelta":
        return cls(d["channel"], np.asarray(d["delta"], dtype=np.float64))


HistogramSet = dict  # channel -> ChannelHistogram


def empty_histograms() -> HistogramSet:
    return {ch: ChannelHistogram.empty(ch) for ch in CHANNELS}


def image_histograms(raster: np.ndarray) -> HistogramSet:
    """Per-channel histograms of one (H, W, 3) uint8 raster."""
    px = np.asarray(raster, dtype=np.uint8).reshape(-1, 3)
    out = {}
    for k, ch in enumerate(("R", "G", "B")):
        out[ch] = ChannelHistogram(ch, np.bincount(px[:, k], minlength=256).astype(np.int64))
    for ch, idx in zip(("L*", "a*", "b*"), lab_bin_indices(rgb_to_lab_array(px))):
        out[ch] = ChannelHistogram(ch, np.bincount(idx, minlength=N_BINS[ch]).astype(np.int64))
    return out


def merge_histograms(into: HistogramSet, part: HistogramSet) -> HistogramSet:
    for ch in CHANNELS:
        into[ch] += part[ch]
    return into


def accumulate_histograms(pairs: Iterable) -> tuple[HistogramSet, HistogramSet]:
    """Histograms of all original and all colorized pixels in ``pairs``."""
    orig, col = empty_histograms(), empty_histograms()
    for pair in pairs:
        merge_histograms(orig, image_histograms(pair.original))
        merge_histograms(col, image_histograms(pair.colorized))
    return orig, col


def histogram_delta(orig: ChannelHistogram, col: ChannelHistogram) -> ChannelDelta:
    """Normalized colorized frequency minus normalized original frequency, per bin.

    Positive values mean the bin's channel value occurs more often in the
    colorized set.
    """
    if orig.channel != col.channel or orig.counts.shape != col.counts.shape:
        raise ValueError("histograms use different channels or binning")
    if orig.total == 0 or col.total == 0:
        raise ValueError(f"{orig.channel}: cannot normalize a histogram with zero total")
    return ChannelDelta(orig.channel, col.counts / col.total - orig.counts / orig.total)


def all_deltas(orig: HistogramSet, col: HistogramSet) -> list[ChannelDelta]:
    return [histogram_delta(orig[ch], col[ch]) for ch in CHANNELS]
