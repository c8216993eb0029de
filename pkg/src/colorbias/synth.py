"""Synthetic bias injection and a naive reference implementation of the metrics.

``apply_transform`` plants a known color effect into a raster, and
``make_corpus`` writes a small paired corpus with a manifest. ``oracle_metrics``
recomputes the metrics with plain per-pixel Python loops. It imports nothing
from the pipeline except the scalar color functions, so agreement between the
two is an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from matplotlib.colors import hsv_to_rgb as _hsv_to_rgb
from matplotlib.colors import rgb_to_hsv as _rgb_to_hsv
from PIL import Image

from .color import lab_distance, rgb_to_hsv, rgb_to_lab

TRANSFORM_KINDS = ("identity", "channel_offset", "saturation_scale", "mud_blend")


@dataclass(frozen=True)
class SyntheticTransform:
    kind: str = "identity"
    channel: str = "B"
    amount: int = 0
    factor: float = 1.0
    alpha: float = 0.0
    mud: np.ndarray | None = None  # (n, n, 3) mean colors for mud_blend

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform {self.kind!r}")
        if self.kind == "channel_offset" and self.channel not in ("R", "G", "B"):
            raise ValueError("channel_offset works on R, G or B")
        if self.kind == "saturation_scale" and not 0.0 <= self.factor <= 2.0:
            raise ValueError("saturation factor must lie in [0, 2]")
        if self.kind == "mud_blend":
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError("mud_blend alpha must lie in [0, 1]")
            if self.mud is None:
                raise ValueError("mud_blend needs a mud grid")

    @classmethod
    def channel_offset(cls, channel: str, amount: int) -> "SyntheticTransform":
        return cls("channel_offset", channel=channel, amount=int(amount))

    @classmethod
    def saturation_scale(cls, factor: float) -> "SyntheticTransform":
        return cls("saturation_scale", factor=float(factor))

    @classmethod
    def mud_blend(cls, alpha: float, mud) -> "SyntheticTransform":
        cells = getattr(getattr(mud, "grid", None), "cells", mud)
        return cls("mud_blend", alpha=float(alpha), mud=np.asarray(cells, dtype=np.float64))


def _round_u8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def pixel_cell_index(length: int, grid: int) -> np.ndarray:
    """Cell containing each pixel's center along one axis."""
    return ((2 * np.arange(length) + 1) * grid) // (2 * length)


def apply_transform(raster: np.ndarray, t: SyntheticTransform) -> np.ndarray:
    """Apply ``t`` pixelwise and return a new uint8 raster.

    Results are rounded half up to 8 bits. ``mud_blend`` moves each pixel
    toward the mud color of the cell containing the pixel center.
    """
    raster = np.asarray(raster, dtype=np.uint8)
    if t.kind == "identity":
        return raster.copy()
    if t.kind == "channel_offset":
        out = raster.astype(np.int16)
        k = "RGB".index(t.channel)
        out[..., k] += t.amount
        return np.clip(out, 0, 255).astype(np.uint8)
    if t.kind == "saturation_scale":
        hsv = _rgb_to_hsv(raster.astype(np.float64) / 255.0)
        hsv[..., 1] = np.clip(hsv[..., 1] * t.factor, 0.0, 1.0)
        return _round_u8(_hsv_to_rgb(hsv) * 255.0)
    h, w = raster.shape[:2]
    n = t.mud.shape[0]
    target = t.mud[pixel_cell_index(h, n)[:, None], pixel_cell_index(w, n)[None, :]]
    return _round_u8((1.0 - t.alpha) * raster + t.alpha * target)


def random_raster(rng: np.random.Generator, height: int, width: int,
                  lo: int = 0, hi: int = 255) -> np.ndarray:
    """Smooth random image: a coarse random color field upsampled, plus noise."""
    gh, gw = rng.integers(2, 7, size=2)
    coarse = rng.uniform(lo, hi, size=(gh, gw, 3)).astype(np.float32)
    channels = [
        np.asarray(Image.fromarray(coarse[..., c], mode="F").resize((width, height), Image.BILINEAR))
        for c in range(3)
    ]
    img = np.stack(channels, axis=-1) + rng.normal(0.0, 6.0, size=(height, width, 3))
    return np.clip(np.floor(img + 0.5), lo, hi).astype(np.uint8)


def make_corpus(out_dir, n: int = 20, transform: SyntheticTransform | None = None, seed: int = 0,
                min_size: int = 64, max_size: int = 512, lo: int = 0, hi: int = 255) -> Path:
    """Write ``n`` random originals, their transformed counterparts and a
    ``manifest.csv``; returns the manifest path.

    Sizes are drawn independently per axis from [min_size, max_size], so
    aspect ratios vary. Categories cycle through the ten scene categories.
    """
    from .dataset import CATEGORIES, write_manifest

    out_dir = Path(out_dir)
    (out_dir / "original").mkdir(parents=True, exist_ok=True)
    (out_dir / "colorized").mkdir(parents=True, exist_ok=True)
    transform = transform or SyntheticTransform()
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        h, w = (int(v) for v in rng.integers(min_size, max_size + 1, size=2))
        orig = random_raster(rng, h, w, lo, hi)
        col = apply_transform(orig, transform)
        name = f"img_{i:05d}.png"
        Image.fromarray(orig, mode="RGB").save(out_dir / "original" / name)
        Image.fromarray(col, mode="RGB").save(out_dir / "colorized" / name)
        rows.append((f"original/{name}", f"colorized/{name}", CATEGORIES[i % 10]))
    return write_manifest(out_dir / "manifest.csv", rows)


# --- naive oracle -----------------------------------------------------------

def _naive_cells(pixels, grid):
    """Box-average a nested-list raster into grid x grid mean colors."""
    h, w = len(pixels), len(pixels[0])
    cells = []
    for i in range(grid):
        y0, y1 = i * h / grid, (i + 1) * h / grid
        row = []
        for j in range(grid):
            x0, x1 = j * w / grid, (j + 1) * w / grid
            acc = [0.0, 0.0, 0.0]
            area = 0.0
            for y in range(int(math.floor(y0)), min(int(math.ceil(y1)), h)):
                wy = min(y1, y + 1) - max(y0, y)
                if wy <= 0:
                    continue
                for x in range(int(math.floor(x0)), min(int(math.ceil(x1)), w)):
                    wx = min(x1, x + 1) - max(x0, x)
                    if wx <= 0:
                        continue
                    p = pixels[y][x]
                    for c in range(3):
                        acc[c] += wy * wx * p[c]
                    area += wy * wx
            row.append([v / area for v in acc])
        cells.append(row)
    return cells


def _naive_bins(p):
    L, a, b = (round(v, 9) for v in rgb_to_lab(p))
    return {
        "R": p[0],
        "G": p[1],
        "B": p[2],
        "L*": min(max(math.floor(L + 0.5), 0), 100),
        "a*": min(max(math.floor(a) + 128, 0), 255),
        "b*": min(max(math.floor(b) + 128, 0), 255),
    }


def _naive_channel(rgb, channel):
    if channel in "RGB":
        return rgb["RGB".index(channel)]
    if channel == "S":
        return rgb_to_hsv(rgb).s
    return rgb_to_lab(rgb)[("L*", "a*", "b*").index(channel)]


def _naive_masks(grid, dot_size=6):
    def bounds(p1, p2, p3):
        s = p1 + p2 + p3
        return math.floor(grid * p1 / s + 0.5), math.floor(grid * (p1 + p2) / s + 0.5)

    t1, t2 = bounds(1, 1, 1)
    g1, g2 = bounds(1, 0.618, 1)

    def dots(b1, b2):
        out = set()
        for r in (b1, b2):
            for c in (b1, b2):
                for y in range(r - dot_size // 2, r - dot_size // 2 + dot_size):
                    for x in range(c - dot_size // 2, c - dot_size // 2 + dot_size):
                        if 0 <= y < grid and 0 <= x < grid:
                            out.add((y, x))
        return out

    cells = [(y, x) for y in range(grid) for x in range(grid)]
    return {
        "center": {(y, x) for y, x in cells if t1 <= y < t2 and t1 <= x < t2},
        "thirds_top": {(y, x) for y, x in cells if y < t1},
        "thirds_bottom": {(y, x) for y, x in cells if y >= t2},
        "thirds_left": {(y, x) for y, x in cells if x < t1},
        "thirds_right": {(y, x) for y, x in cells if x >= t2},
        "thirds_hcenter": {(y, x) for y, x in cells if t1 <= y < t2},
        "thirds_vcenter": {(y, x) for y, x in cells if t1 <= x < t2},
        "thirds_intersections": dots(t1, t2),
        "golden_band_h": {(y, x) for y, x in cells if g1 <= y < g2},
        "golden_band_v": {(y, x) for y, x in cells if g1 <= x < g2},
        "golden_dots": dots(g1, g2),
    }


def oracle_metrics(originals, transformed, grid: int = 64, mud=None, reference=None,
                   channels=("R", "G", "B", "L*", "a*", "b*", "S")) -> dict:
    """Recompute every metric naively.

    ``mud`` is an (n, n, 3) array of mud colors; alternatively ``reference``
    rasters are averaged into one. Returns a dict with ``histograms``
    (``{"original"|"colorized": {channel: [counts]}}``), ``deltas``,
    ``cells``, ``shifts`` (channel -> grid as nested lists), ``mean_distance``,
    ``mud`` / ``mud_delta`` when a mud is available, and ``regional`` (a list
    per pair of ``{mask: (absolute, relative)}``).
    """
    originals = [np.asarray(r).tolist() for r in originals]
    transformed = [np.asarray(r).tolist() for r in transformed]
    if len(originals) != len(transformed):
        raise ValueError("original and transformed sets differ in length")

    sizes = {"R": 256, "G": 256, "B": 256, "L*": 101, "a*": 256, "b*": 256}
    hist = {side: {ch: [0] * n for ch, n in sizes.items()} for side in ("original", "colorized")}
    for side, images in (("original", originals), ("colorized", transformed)):
        for img in images:
            for row in img:
                for p in row:
                    for ch, idx in _naive_bins(p).items():
                        hist[side][ch][idx] += 1
    deltas = {}
    for ch in sizes:
        to = sum(hist["original"][ch])
        tc = sum(hist["colorized"][ch])
        if to and tc:
            deltas[ch] = [c / tc - o / to for o, c in zip(hist["original"][ch], hist["colorized"][ch])]

    cells = [(_naive_cells(o, grid), _naive_cells(t, grid)) for o, t in zip(originals, transformed)]
    npairs = len(cells)
    shifts = {}
    for ch in channels:
        g = [[0.0] * grid for _ in range(grid)]
        for co, cc in cells:
            for i in range(grid):
                for j in range(grid):
                    g[i][j] += _naive_channel(cc[i][j], ch) - _naive_channel(co[i][j], ch)
        shifts[ch] = [[v / npairs for v in row] for row in g] if npairs else g

    dist_grids = []
    for co, cc in cells:
        dist_grids.append(
            [[lab_distance(rgb_to_lab(cc[i][j]), rgb_to_lab(co[i][j])) for j in range(grid)]
             for i in range(grid)]
        )
    mean_distance = (
        sum(sum(sum(r) for r in d) / (grid * grid) for d in dist_grids) / npairs if npairs else 0.0
    )

    result = {
        "histograms": hist,
        "deltas": deltas,
        "cells": cells,
        "shifts": shifts,
        "mean_distance": mean_distance,
    }

    if mud is None and reference is not None:
        ref_cells = [_naive_cells(np.asarray(r).tolist(), grid) for r in reference]
        mud = [
            [[sum(rc[i][j][c] for rc in ref_cells) / len(ref_cells) for c in range(3)]
             for j in range(grid)]
            for i in range(grid)
        ]
    if mud is not None:
        mud = np.asarray(mud, dtype=np.float64).tolist()
        mud_lab = [[rgb_to_lab(mud[i][j]) for j in range(grid)] for i in range(grid)]
        md = [[0.0] * grid for _ in range(grid)]
        for co, cc in cells:
            for i in range(grid):
                for j in range(grid):
                    md[i][j] += lab_distance(rgb_to_lab(cc[i][j]), mud_lab[i][j]) - lab_distance(
                        rgb_to_lab(co[i][j]), mud_lab[i][j]
                    )
        result["mud"] = mud
        result["mud_delta"] = [[v / npairs for v in row] for row in md]

    masks = _naive_masks(grid)
    regional = []
    for d in dist_grids:
        scores = {}
        for kind, region in masks.items():
            inside = [d[y][x] for y, x in region]
            outside = [d[y][x] for y in range(grid) for x in range(grid) if (y, x) not in region]
            if not inside or not outside:
                continue
            absolute = sum(inside) / len(inside)
            scores[kind] = (absolute, absolute - sum(outside) / len(outside))
        regional.append(scores)
    result["regional"] = regional
    return result
