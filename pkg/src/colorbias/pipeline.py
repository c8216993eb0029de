"""Single-pass batch analysis over a manifest.

Per-pair work (decode, histograms, cell grids) runs on a thread pool; all
reduction happens on the calling thread in manifest order, which makes the
report independent of the thread count.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import __version__
from .dataset import Manifest, PairError, SkipLog, decode_image, load_pair
from .metrics_global import (
    CHANNELS,
    all_deltas,
    empty_histograms,
    image_histograms,
    merge_histograms,
)
from .metrics_local import (
    GRID,
    LOCAL_CHANNELS,
    CellGrid,
    KahanSum,
    LocalAccumulator,
    MudImage,
    aggregate_to_cells,
    pair_cells,
)
from .metrics_regional import (
    DOT_SIZE,
    GOLDEN,
    MASK_KINDS,
    THIRDS,
    all_masks,
    rank_candidates,
    split_boundaries,
    summarize_pair,
    top_n,
)
from .report import RunReport

log = logging.getLogger(__name__)

ANALYSES = ("global", "local", "mud", "regional")


@dataclass
class AnalysisConfig:
    analyses: tuple = ANALYSES
    grid: int = GRID
    top_n: int = 5
    candidates: int = 400
    threads: int = 1
    dot_size: int = DOT_SIZE
    progress_interval: float = 5.0

    def __post_init__(self):
        self.analyses = tuple(a for a in ANALYSES if a in set(self.analyses))
        if not self.analyses:
            raise ValueError("no analyses enabled")
        if self.grid < 2:
            raise ValueError("grid size must be >= 2")
        if self.top_n < 1 or self.candidates < 1:
            raise ValueError("top-n and candidate count must be >= 1")
        if self.threads < 1:
            raise ValueError("thread count must be >= 1")

    def parameters(self) -> dict:
        return {
            "analyses": list(self.analyses),
            "grid": self.grid,
            "top_n": self.top_n,
            "candidates": self.candidates,
            "binning": {
                "R,G,B": "256 unit bins, value",
                "L*": "101 unit bins, floor(L+0.5) clipped to [0,100]",
                "a*,b*": "256 unit bins over [-128,128), floor(v)+128 clipped",
            },
            "masks": {
                "kinds": list(MASK_KINDS),
                "thirds_boundaries": list(split_boundaries(self.grid, THIRDS)),
                "golden_proportions": list(GOLDEN),
                "golden_boundaries": list(split_boundaries(self.grid, GOLDEN)),
                "dot_size": self.dot_size,
            },
        }


@dataclass
class _PairResult:
    entry: object
    error: Exception | None = None
    hist: tuple | None = None
    cells: object = None
    converted: bool = False


class Progress:
    """Logs ``done/total`` to stderr at most once per ``interval`` seconds."""

    def __init__(self, total: int, interval: float, label: str = "pairs"):
        self.total = total
        self.interval = interval
        self.label = label
        self.done = 0
        self._last = time.monotonic()

    def step(self) -> None:
        self.done += 1
        now = time.monotonic()
        if self.interval > 0 and now - self._last >= self.interval:
            self._last = now
            log.info("%d/%d %s", self.done, self.total, self.label)


def default_threads() -> int:
    value = os.environ.get("COLORBIAS_THREADS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            log.warning("ignoring non-integer COLORBIAS_THREADS=%r", value)
    return 1


def _relpath(path, manifest: Manifest) -> str:
    if manifest.source is None:
        return str(path)
    return os.path.relpath(path, manifest.source.parent)


def compute_mud_from_manifest(manifest: Manifest, grid: int = GRID, threads: int = 1,
                              skips: SkipLog | None = None) -> MudImage:
    """Mean cell colors of the manifest's original images."""

    def work(entry):
        try:
            return aggregate_to_cells(decode_image(entry.original)[0], grid).cells
        except PairError as exc:
            return exc

    acc = KahanSum((grid, grid, 3))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for entry, cells in zip(manifest, pool.map(work, manifest)):
            if isinstance(cells, Exception):
                if skips is not None:
                    skips.add(entry, cells)
                continue
            acc.add(cells)
    if acc.count == 0:
        raise ValueError("no decodable reference images")
    return MudImage(CellGrid(acc.mean(), "color"), acc.count)


def analyze(manifest: Manifest, config: AnalysisConfig | None = None,
            mud: MudImage | None = None, mud_source: str | None = None) -> RunReport:
    """Run the enabled analyses over every pair in ``manifest``."""
    config = config or AnalysisConfig()
    enabled = set(config.analyses)
    need_cells = bool(enabled & {"local", "mud", "regional"})
    if "mud" in enabled and mud is None:
        mud = compute_mud_from_manifest(manifest, config.grid, config.threads)
        mud_source = "manifest originals"
    if "mud" not in enabled:
        mud = None
    masks = all_masks(config.grid, config.dot_size) if "regional" in enabled else []

    def work(entry) -> _PairResult:
        try:
            pair = load_pair(entry)
        except PairError as exc:
            return _PairResult(entry, error=exc)
        res = _PairResult(entry, converted=pair.converted)
        if "global" in enabled:
            res.hist = (image_histograms(pair.original), image_histograms(pair.colorized))
        if need_cells:
            res.cells = pair_cells(pair, config.grid)
        return res

    skips = SkipLog()
    hist_o, hist_c = empty_histograms(), empty_histograms()
    local = (
        LocalAccumulator(config.grid, LOCAL_CHANNELS if "local" in enabled else (), mud)
        if need_cells
        else None
    )
    summaries = []
    converted = []
    progress = Progress(len(manifest), config.progress_interval)

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        for res in pool.map(work, manifest):
            progress.step()
            if res.error is not None:
                skips.add(res.entry, res.error)
                continue
            if res.converted:
                converted.append(res.entry.index)
            if res.hist is not None:
                merge_histograms(hist_o, res.hist[0])
                merge_histograms(hist_c, res.hist[1])
            if res.cells is not None:
                local.add(res.cells)
                if masks:
                    summaries.append(summarize_pair(res.cells, masks))

    processed = len(manifest) - len(skips)
    entries = {e.index: e for e in manifest}

    def paths(pair_id: int) -> dict:
        e = entries[pair_id]
        return {"original": _relpath(e.original, manifest), "colorized": _relpath(e.colorized, manifest)}

    report = RunReport(
        tool_version=__version__,
        manifest_digest=manifest.digest,
        parameters=config.parameters(),
        counts={"entries": len(manifest), "processed": processed, "skipped": len(skips)},
        skipped=[
            dict(s, original=_relpath(entries[s["pair_id"]].original, manifest)) for s in skips.skipped
        ],
        warnings=list(manifest.warnings),
        converted=converted,
    )
    if "global" in enabled:
        report.histograms = {
            "original": [hist_o[ch] for ch in CHANNELS],
            "colorized": [hist_c[ch] for ch in CHANNELS],
        }
        if processed:
            report.global_deltas = all_deltas(hist_o, hist_c)
    if "local" in enabled and processed:
        report.local = local.shift_grids()
    if need_cells and processed:
        report.per_category = local.category_table()
    if mud is not None:
        report.mud = mud
        report.parameters["mud_source"] = mud_source or "supplied"
        if processed:
            report.mud_delta = local.mud_delta()
    if masks and summaries:
        records = []
        for kind in MASK_KINDS:
            scores = [s.scores[kind] for s in summaries]
            for by in ("absolute", "relative"):
                for rank, sc in enumerate(top_n(scores, config.top_n, by), start=1):
                    records.append(dict(sc.to_dict(), by=by, rank=rank, **paths(sc.pair_id)))
        report.regional = records
        report.candidates = [
            dict(c, **paths(c["pair_id"])) for c in rank_candidates(summaries, config.candidates)
        ]
    return report
