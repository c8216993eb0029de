"""Local color bias on a fixed cell grid (64x64 by default).

Each image is box-resampled to ``grid x grid`` cells regardless of aspect
ratio; a cell holds the area-weighted mean RGB of the pixels it covers, with
pixels straddling a cell boundary contributing their fractional area.
Channel statistics (Lab, HSV saturation) are evaluated on the cell's mean
RGB, not averaged from per-pixel conversions.

Dataset-level means are accumulated with compensated summation in manifest
order, so repeated runs give bit-identical grids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image

from .color import lab_distance_array, rgb_to_lab_array, saturation_array

GRID = 64
LOCAL_CHANNELS = ("R", "G", "B", "L*", "a*", "b*", "S")


@dataclass
class CellGrid:
    """``cells`` is (n, n, 3) for kind ``"color"`` or (n, n) for ``"scalar"``."""

    cells: np.ndarray
    kind: str = "scalar"

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.float64)
        n = self.cells.shape[0]
        expected = (n, n, 3) if self.kind == "color" else (n, n)
        if self.kind not in ("color", "scalar") or self.cells.shape != expected:
            raise ValueError(f"bad {self.kind} grid of shape {self.cells.shape}")

    @property
    def size(self) -> int:
        return self.cells.shape[0]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "cells": self.cells.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CellGrid":
        return cls(np.asarray(d["cells"], dtype=np.float64), d["kind"])

    def __eq__(self, other):
        if not isinstance(other, CellGrid):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.cells, other.cells)


@dataclass
class ShiftGrid:
    channel: str
    grid: CellGrid
    sample_count: int
    category: str | None = None

    @property
    def empty(self) -> bool:
        return self.sample_count == 0

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "category": self.category,
            "sample_count": self.sample_count,
            "empty": self.empty,
            "grid": self.grid.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShiftGrid":
        return cls(d["channel"], CellGrid.from_dict(d["grid"]), d["sample_count"], d["category"])


@dataclass
class MudImage:
    grid: CellGrid
    source_count: int

    def __post_init__(self):
        if self.source_count < 1:
            raise ValueError("a mud image needs at least one reference image")
        if self.grid.kind != "color":
            raise ValueError("mud grid must hold colors")

    def to_dict(self) -> dict:
        return {"source_count": self.source_count, "grid": self.grid.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "MudImage":
        return cls(CellGrid.from_dict(d["grid"]), d["source_count"])

    def save(self, png_path) -> Path:
        """Write a rounded RGB preview PNG and an exact JSON sidecar next to it."""
        png_path = Path(png_path)
        png_path.parent.mkdir(parents=True, exist_ok=True)
        rgb = np.clip(np.floor(self.grid.cells + 0.5), 0, 255).astype(np.uint8)
        Image.fromarray(rgb, mode="RGB").save(png_path)
        sidecar = png_path.with_suffix(".json")
        sidecar.write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")
        return sidecar

    @classmethod
    def load(cls, path) -> "MudImage":
        path = Path(path)
        if path.suffix.lower() != ".json":
            path = path.with_suffix(".json")
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


class KahanSum:
    """Elementwise compensated summation for arrays or scalars."""

    def __init__(self, shape=()):
        self.total = np.zeros(shape, dtype=np.float64)
        self._comp = np.zeros(shape, dtype=np.float64)
        self.count = 0

    def add(self, x) -> None:
        y = np.asarray(x, dtype=np.float64) - self._comp
        t = self.total + y
        self._comp = (t - self.total) - y
        self.total = t
        self.count += 1

    def mean(self) -> np.ndarray:
        if self.count == 0:
            return np.zeros_like(self.total)
        return self.total / self.count


@lru_cache(maxsize=256)
def _axis_weights(n: int, cells: int) -> np.ndarray:
    """Integer overlap matrix (cells, n), in units of 1/cells of a pixel.

    Pixel x spans [x*cells, (x+1)*cells) and cell j spans [j*n, (j+1)*n) on a
    common integer axis, so overlaps are exact; each row sums to ``n``.
    """
    lo = np.arange(cells)[:, None] * n
    px = np.arange(n)[None, :] * cells
    overlap = np.minimum(lo + n, px + cells) - np.maximum(lo, px)
    w = np.clip(overlap, 0, None).astype(np.float64)
    w.setflags(write=False)
    return w


def cell_sums(raster: np.ndarray, grid: int = GRID) -> tuple[np.ndarray, float]:
    """Weighted per-cell channel sums and the common weight of every cell.

    With integer rasters every sum is an exact integer in float64 (up to
    ~10^13 pixel-weights), so the result does not depend on BLAS summation
    order.
    """
    raster = np.asarray(raster)
    if raster.ndim != 3 or raster.shape[2] != 3 or raster.shape[0] < 1 or raster.shape[1] < 1:
        raise ValueError(f"expected a nonempty (H, W, 3) raster, got {raster.shape}")
    h, w = raster.shape[:2]
    wy = _axis_weights(h, grid)
    wx = _axis_weights(w, grid)
    # Contiguous 2-D products keep to the BLAS fast path; strided per-channel
    # views are ~25x slower.
    rows = (wy @ raster.reshape(h, w * 3).astype(np.float64)).reshape(grid, w, 3)
    out = np.matmul(wx, rows)
    return out, float(h) * float(w)


def aggregate_to_cells(raster: np.ndarray, grid: int = GRID) -> CellGrid:
    """Area-weighted mean color of each cell of a ``grid x grid`` partition.

    Uniform integer rasters map to exactly uniform cells.
    """
    sums, area = cell_sums(raster, grid)
    return CellGrid(sums / area, "color")


def channel_values(rgb_cells: np.ndarray, channel: str) -> np.ndarray:
    """Extract one channel from an (..., 3) array of mean RGB colors."""
    if channel in ("R", "G", "B"):
        return np.asarray(rgb_cells, dtype=np.float64)[..., "RGB".index(channel)]
    if channel in ("L*", "a*", "b*"):
        return rgb_to_lab_array(rgb_cells)[..., ("L*", "a*", "b*").index(channel)]
    if channel == "S":
        return saturation_array(rgb_cells)
    raise ValueError(f"unknown channel {channel!r}")


@dataclass
class PairCells:
    """Cell-level view of one image pair; everything the local and regional
    metrics need, computed once per pair."""

    pair_id: int
    category: str
    original: np.ndarray
    colorized: np.ndarray
    rgb_delta: np.ndarray | None = field(default=None, repr=False)
    original_lab: np.ndarray = field(init=False, repr=False)
    colorized_lab: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.original_lab = rgb_to_lab_array(self.original)
        self.colorized_lab = rgb_to_lab_array(self.colorized)

    def shift(self, channel: str) -> np.ndarray:
        if channel in ("L*", "a*", "b*"):
            k = ("L*", "a*", "b*").index(channel)
            return self.colorized_lab[..., k] - self.original_lab[..., k]
        if channel in ("R", "G", "B") and self.rgb_delta is not None:
            return self.rgb_delta[..., "RGB".index(channel)]
        return channel_values(self.colorized, channel) - channel_values(self.original, channel)

    def lab_distance_grid(self) -> np.ndarray:
        """Per-cell CIE76 distance between colorized and original."""
        return lab_distance_array(self.colorized_lab, self.original_lab)


def pair_cells(pair, grid: int = GRID) -> PairCells:
    so, area = cell_sums(pair.original, grid)
    sc, _ = cell_sums(pair.colorized, grid)
    # RGB shifts come from the exact integer sums, so a constant per-pixel
    # offset gives exactly that offset in every cell.
    return PairCells(pair.pair_id, pair.category, so / area, sc / area, rgb_delta=(sc - so) / area)


def cell_shift(pair, channel: str, grid: int = GRID) -> CellGrid:
    """Per-cell ``f(colorized mean) - f(original mean)`` for one channel."""
    if channel not in LOCAL_CHANNELS:
        raise ValueError(f"unknown channel {channel!r}")
    return CellGrid(pair_cells(pair, grid).shift(channel))


class LocalAccumulator:
    """One-pass reducer for shift grids (overall and per category), per-category
    mean Lab distance, and the optional distance-to-mud delta.

    Feed :class:`PairCells` in manifest order.
    """

    def __init__(self, grid: int = GRID, channels=LOCAL_CHANNELS, mud: MudImage | None = None):
        self.grid = grid
        self.channels = tuple(channels)
        self.shift_sums: dict[str | None, dict[str, KahanSum]] = {}
        self.distance_sums: dict[str | None, KahanSum] = {}
        self.mud = mud
        self.mud_sum = KahanSum((grid, grid))
        self._mud_lab = None
        if mud is not None:
            if mud.grid.size != grid:
                raise ValueError(f"mud grid is {mud.grid.size}, analysis grid is {grid}")
            self._mud_lab = rgb_to_lab_array(mud.grid.cells)

    def _slot(self, key):
        if key not in self.shift_sums:
            self.shift_sums[key] = {ch: KahanSum((self.grid, self.grid)) for ch in self.channels}
            self.distance_sums[key] = KahanSum()
        return self.shift_sums[key], self.distance_sums[key]

    def add(self, pc: PairCells) -> None:
        shifts = {ch: pc.shift(ch) for ch in self.channels}
        dist = float(pc.lab_distance_grid().mean())
        for key in (None, pc.category):
            sums, dsum = self._slot(key)
            for ch in self.channels:
                sums[ch].add(shifts[ch])
            dsum.add(dist)
        if self._mud_lab is not None:
            self.mud_sum.add(
                lab_distance_array(pc.colorized_lab, self._mud_lab)
                - lab_distance_array(pc.original_lab, self._mud_lab)
            )

    @property
    def count(self) -> int:
        return self.distance_sums[None].count if None in self.distance_sums else 0

    def shift_grid(self, channel: str, category: str | None = None) -> ShiftGrid:
        if category not in self.shift_sums:
            return ShiftGrid(channel, CellGrid(np.zeros((self.grid, self.grid))), 0, category)
        acc = self.shift_sums[category][channel]
        return ShiftGrid(channel, CellGrid(acc.mean()), acc.count, category)

    def shift_grids(self) -> list[ShiftGrid]:
        """Overall grids first, then per-category grids in sorted category order."""
        cats = sorted(k for k in self.shift_sums if k is not None)
        out = [self.shift_grid(ch) for ch in self.channels]
        for cat in cats:
            out.extend(self.shift_grid(ch, cat) for ch in self.channels)
        return out

    def mean_distance(self, category: str | None = None) -> float:
        if category not in self.distance_sums:
            raise ValueError(f"no pairs for category {category!r}")
        return float(self.distance_sums[category].mean())

    def category_table(self) -> list[dict]:
        rows = []
        for key in [None] + sorted(k for k in self.distance_sums if k is not None):
            rows.append(
                {
                    "category": "all" if key is None else key,
                    "mean_lab_distance": self.mean_distance(key),
                    "sample_count": self.distance_sums[key].count,
                }
            )
        return rows

    def mud_delta(self) -> CellGrid:
        if self._mud_lab is None:
            raise ValueError("no mud image configured")
        if self.mud_sum.count == 0:
            raise ValueError("no pairs accumulated")
        return CellGrid(self.mud_sum.mean())


def _filtered(pairs, category_filter):
    return (p for p in pairs if category_filter is None or p.category == category_filter)


def mean_shift_grid(pairs: Iterable, channel: str, category_filter: str | None = None,
                    grid: int = GRID) -> ShiftGrid:
    """Mean per-cell shift over pairs, optionally restricted to one category.

    With no matching pairs the result is an all-zero grid with
    ``sample_count == 0`` (``empty`` is True).
    """
    if channel not in LOCAL_CHANNELS:
        raise ValueError(f"unknown channel {channel!r}")
    acc = KahanSum((grid, grid))
    for p in _filtered(pairs, category_filter):
        acc.add(pair_cells(p, grid).shift(channel))
    return ShiftGrid(channel, CellGrid(acc.mean()), acc.count, category_filter)


def mean_cell_lab_distance(pairs: Iterable, category_filter: str | None = None,
                           grid: int = GRID) -> float:
    acc = KahanSum()
    for p in _filtered(pairs, category_filter):
        acc.add(pair_cells(p, grid).lab_distance_grid().mean())
    if acc.count == 0:
        raise ValueError("no pairs to average")
    return float(acc.mean())


def compute_mud(reference: Iterable[np.ndarray], grid: int = GRID) -> MudImage:
    """Per-cell mean RGB over a stream of reference rasters."""
    acc = KahanSum((grid, grid, 3))
    for raster in reference:
        acc.add(aggregate_to_cells(raster, grid).cells)
    if acc.count == 0:
        raise ValueError("mud needs at least one reference image")
    return MudImage(CellGrid(acc.mean(), "color"), acc.count)


def mud_distance_delta(pairs: Iterable, mud: MudImage) -> CellGrid:
    """Per cell, mean over pairs of dE(colorized, mud) - dE(original, mud).

    Negative cells mean the colorized images sit closer to the mud color.
    """
    acc = LocalAccumulator(mud.grid.size, channels=(), mud=mud)
    for p in pairs:
        acc.add(pair_cells(p, mud.grid.size))
    return acc.mud_delta()
