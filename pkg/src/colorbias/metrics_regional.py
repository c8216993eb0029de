"""Regional color bias over composition-rule masks.

A 3-way split of an axis of ``n`` cells in proportions p1:p2:p3 has its
boundaries at ``round(n*p1/sum)`` and ``round(n*(p1+p2)/sum)``. For n = 64
the thirds boundaries are 21 and 43 and the golden-grid (1:0.618:1)
boundaries are 24 and 40. Band masks are half-open: rows ``[0, 21)`` form
``thirds_top``. ``center`` is the intersection of the two middle thirds
bands. The ``*_intersections``/``*_dots`` masks are square patches of
``dot_size`` cells centered on the four boundary crossings.

Scores work on the per-cell CIE76 distance between colorized and original.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .metrics_local import GRID, PairCells

MASK_KINDS = (
    "center",
    "thirds_top",
    "thirds_bottom",
    "thirds_left",
    "thirds_right",
    "thirds_hcenter",
    "thirds_vcenter",
    "thirds_intersections",
    "golden_band_h",
    "golden_band_v",
    "golden_dots",
)

THIRDS = (1.0, 1.0, 1.0)
GOLDEN = (1.0, 0.618, 1.0)
DOT_SIZE = 6


def split_boundaries(n: int, proportions: Sequence[float]) -> tuple[int, int]:
    p1, p2, p3 = proportions
    total = p1 + p2 + p3
    # Python's round() is half-to-even; use half-up so the rule is symmetric
    # with the usual reading of "round".
    return int(np.floor(n * p1 / total + 0.5)), int(np.floor(n * (p1 + p2) / total + 0.5))


@dataclass(frozen=True)
class RegionMask:
    kind: str
    mask: np.ndarray

    @property
    def cell_count(self) -> int:
        return int(self.mask.sum())


def _dots(n: int, bounds: tuple[int, int], size: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=bool)
    half = size // 2
    for r in bounds:
        for c in bounds:
            m[max(r - half, 0):r - half + size, max(c - half, 0):c - half + size] = True
    return m


def make_mask(kind: str, grid: int = GRID, dot_size: int = DOT_SIZE) -> RegionMask:
    if kind not in MASK_KINDS:
        raise ValueError(f"unknown mask kind {kind!r}; expected one of {', '.join(MASK_KINDS)}")
    t1, t2 = split_boundaries(grid, THIRDS)
    g1, g2 = split_boundaries(grid, GOLDEN)
    rows = np.arange(grid)[:, None]
    cols = np.arange(grid)[None, :]
    full = np.ones((grid, grid), dtype=bool)
    if kind == "center":
        m = (rows >= t1) & (rows < t2) & (cols >= t1) & (cols < t2)
    elif kind == "thirds_top":
        m = (rows < t1) & full
    elif kind == "thirds_bottom":
        m = (rows >= t2) & full
    elif kind == "thirds_hcenter":
        m = (rows >= t1) & (rows < t2) & full
    elif kind == "thirds_left":
        m = (cols < t1) & full
    elif kind == "thirds_right":
        m = (cols >= t2) & full
    elif kind == "thirds_vcenter":
        m = (cols >= t1) & (cols < t2) & full
    elif kind == "golden_band_h":
        m = (rows >= g1) & (rows < g2) & full
    elif kind == "golden_band_v":
        m = (cols >= g1) & (cols < g2) & full
    elif kind == "thirds_intersections":
        m = _dots(grid, (t1, t2), dot_size)
    else:
        m = _dots(grid, (g1, g2), dot_size)
    mask = RegionMask(kind, m)
    if not 0 < mask.cell_count < grid * grid:
        raise ValueError(f"mask {kind!r} is degenerate on a {grid}x{grid} grid")
    return mask


def all_masks(grid: int = GRID, dot_size: int = DOT_SIZE) -> list[RegionMask]:
    return [make_mask(k, grid, dot_size) for k in MASK_KINDS]


@dataclass(frozen=True)
class RegionalScore:
    pair_id: int
    mask_kind: str
    absolute: float
    relative: float

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "mask_kind": self.mask_kind,
            "absolute": self.absolute,
            "relative": self.relative,
        }


def regional_scores(shift: np.ndarray, mask: RegionMask, pair_id: int = 0) -> RegionalScore:
    """Mean shift inside the mask, and that mean minus the mean outside."""
    shift = np.asarray(shift, dtype=np.float64)
    inside = shift[mask.mask]
    outside = shift[~mask.mask]
    if outside.size == 0 or inside.size == 0:
        raise ValueError(f"mask {mask.kind!r} has an empty region or complement")
    # Centering on the grid minimum makes uniform fields score relative == 0
    # exactly, whatever the region sizes.
    base = float(shift.min())
    mean_in = float((inside - base).mean())
    mean_out = float((outside - base).mean())
    return RegionalScore(pair_id, mask.kind, base + mean_in, mean_in - mean_out)


def top_n(scores: Iterable[RegionalScore], n: int, by: str = "absolute") -> list[RegionalScore]:
    """Highest ``by`` values first; equal values keep manifest (pair_id) order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if by not in ("absolute", "relative"):
        raise ValueError(f"cannot rank by {by!r}")
    return sorted(scores, key=lambda s: (-getattr(s, by), s.pair_id))[:n]


@dataclass
class PairSummary:
    """Per-pair numbers needed for ranking, kept instead of full grids."""

    pair_id: int
    category: str
    mean_shift: float
    std_shift: float
    scores: dict  # mask kind -> RegionalScore

    @property
    def best_relative(self) -> RegionalScore:
        # First mask kind wins ties, so the choice is stable.
        return max(self.scores.values(), key=lambda s: s.relative)


def summarize_pair(pc: PairCells, masks: Sequence[RegionMask]) -> PairSummary:
    de = pc.lab_distance_grid()
    return PairSummary(
        pc.pair_id,
        pc.category,
        float(de.mean()),
        float(de.std()),
        {m.kind: regional_scores(de, m, pc.pair_id) for m in masks},
    )


def _ranked(summaries, key, n):
    return sorted(summaries, key=lambda s: (-key(s), s.pair_id))[:n]


def rank_candidates(summaries: Sequence[PairSummary], n: int = 400) -> list[dict]:
    """Merge three rankings into at most ``n`` distinct candidates.

    The rankings are by mean cell distance, by its standard deviation, and by
    the best relative regional score over all masks. They are interleaved
    rank by rank (mean, std, relative), dropping pairs already taken, so each
    criterion is represented even when the union exceeds ``n``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lists = {
        "mean": _ranked(summaries, lambda s: s.mean_shift, n),
        "std": _ranked(summaries, lambda s: s.std_shift, n),
        "relative": _ranked(summaries, lambda s: s.best_relative.relative, n),
    }
    picked: dict[int, dict] = {}
    for rank in range(n):
        for reason, ranked in lists.items():
            if rank >= len(ranked):
                continue
            s = ranked[rank]
            if s.pair_id in picked:
                picked[s.pair_id]["reasons"].append(reason)
                continue
            if len(picked) >= n:
                continue
            best = s.best_relative
            picked[s.pair_id] = {
                "pair_id": s.pair_id,
                "category": s.category,
                "mean_shift": s.mean_shift,
                "std_shift": s.std_shift,
                "mask_kind": best.mask_kind,
                "absolute": best.absolute,
                "relative": best.relative,
                "reasons": [reason],
            }
    return list(picked.values())


def select_study_candidates(pairs: Iterable, n: int = 400, grid: int = GRID,
                            dot_size: int = DOT_SIZE) -> list[dict]:
    from .metrics_local import pair_cells

    masks = all_masks(grid, dot_size)
    summaries = [summarize_pair(pair_cells(p, grid), masks) for p in pairs]
    if not summaries:
        raise ValueError("no pairs to rank")
    return rank_candidates(summaries, n)
