"""Report serialization and figure rendering.

``report.json`` is written with sorted keys and shortest round-trip float
formatting, so identical inputs give byte-identical files and parsing the
file restores every value exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .metrics_global import ChannelDelta, ChannelHistogram, bin_values
from .metrics_local import CellGrid, MudImage, ShiftGrid


@dataclass(eq=False)
class RunReport:
    tool_version: str = ""
    manifest_digest: str = ""
    parameters: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    converted: list = field(default_factory=list)
    histograms: dict = field(default_factory=dict)  # side -> [ChannelHistogram]
    global_deltas: list = field(default_factory=list)  # [ChannelDelta]
    local: list = field(default_factory=list)  # [ShiftGrid]
    mud: MudImage | None = None
    mud_delta: CellGrid | None = None
    regional: list = field(default_factory=list)
    candidates: list = field(default_factory=list)
    per_category: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "manifest_digest": self.manifest_digest,
            "parameters": self.parameters,
            "counts": self.counts,
            "skipped": self.skipped,
            "warnings": self.warnings,
            "converted": self.converted,
            "global": {
                "histograms": {
                    side: [h.to_dict() for h in hs] for side, hs in self.histograms.items()
                },
                "deltas": [d.to_dict() for d in self.global_deltas],
            },
            "local": [g.to_dict() for g in self.local],
            "mud": None
            if self.mud is None
            else {
                "image": self.mud.to_dict(),
                "delta": None if self.mud_delta is None else self.mud_delta.to_dict(),
            },
            "regional": {"top_n": self.regional, "candidates": self.candidates},
            "per_category": self.per_category,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        mud = d.get("mud")
        return cls(
            tool_version=d["tool_version"],
            manifest_digest=d["manifest_digest"],
            parameters=d["parameters"],
            counts=d["counts"],
            skipped=d["skipped"],
            warnings=d["warnings"],
            converted=d["converted"],
            histograms={
                side: [ChannelHistogram.from_dict(h) for h in hs]
                for side, hs in d["global"]["histograms"].items()
            },
            global_deltas=[ChannelDelta.from_dict(x) for x in d["global"]["deltas"]],
            local=[ShiftGrid.from_dict(x) for x in d["local"]],
            mud=None if mud is None else MudImage.from_dict(mud["image"]),
            mud_delta=None if not mud or mud["delta"] is None else CellGrid.from_dict(mud["delta"]),
            regional=d["regional"]["top_n"],
            candidates=d["regional"]["candidates"],
            per_category=d["per_category"],
        )

    def __eq__(self, other):
        if not isinstance(other, RunReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def dumps(report: RunReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def emit_json(report: RunReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report), encoding="utf-8")
    return path


def load_json(path) -> RunReport:
    return RunReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def diverging_colors(values: np.ndarray, bound: float, inverted: bool = False) -> np.ndarray:
    """Map values to blue (negative) / white (zero) / red (positive).

    The palette depends only on ``|v| / bound`` and the sign, so negating the
    input swaps the red and blue channels exactly. ``inverted`` swaps the
    ends, which suits b* grids where negative means a shift toward blue.
    """
    v = np.asarray(values, dtype=np.float64)
    t = np.zeros_like(v) if bound <= 0 else np.clip(v / bound, -1.0, 1.0)
    level = np.floor(255.0 * (1.0 - np.abs(t)) + 0.5).astype(np.uint8)
    full = np.full_like(level, 255)
    warm = (t > 0) != inverted
    cold = (t < 0) != inverted
    r = np.where(cold & (t != 0), level, full)
    b = np.where(warm & (t != 0), level, full)
    return np.stack([r, level, b], axis=-1)


def emit_heatmap(grid, out_path, bound: float | None = None, inverted: bool = False,
                 upscale: int = 1, label: str | None = None) -> Path:
    """Write a diverging heatmap PNG of a scalar grid plus a JSON sidecar.

    The color scale is symmetric, ``[-bound, bound]``, with ``bound``
    defaulting to the largest absolute cell value.
    """
    cells = grid.cells if isinstance(grid, CellGrid) else np.asarray(grid, dtype=np.float64)
    if cells.ndim != 2 or not np.all(np.isfinite(cells)):
        raise ValueError("heatmap needs a finite 2-D grid")
    if bound is None:
        bound = float(np.abs(cells).max()) if cells.size else 0.0
    rgb = diverging_colors(cells, bound, inverted)
    if upscale > 1:
        rgb = np.repeat(np.repeat(rgb, upscale, axis=0), upscale, axis=1)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(rgb, mode="RGB").save(out_path)
    sidecar = {
        "vmin": -bound,
        "vmax": bound,
        "palette": "red-white-blue" if inverted else "blue-white-red",
        "upscale": upscale,
        "grid": list(cells.shape),
        "label": label,
    }
    out_path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n", encoding="utf-8")
    return out_path


def emit_delta_plot(delta: ChannelDelta, out_path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not np.all(np.isfinite(delta.delta)):
        raise ValueError("delta must be finite")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 3), dpi=100)
    ax.plot(bin_values(delta.channel), delta.delta, color="tab:blue", linewidth=1.0)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel(f"{delta.channel} value")
    ax.set_ylabel("Δ frequency (colorized − original)")
    ax.set_title(f"Channel shift: {delta.channel}")
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Software": None})
    plt.close(fig)
    return out_path


def emit_category_csv(rows: list, out_path) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["category", "mean_lab_distance", "sample_count"])
        for r in rows:
            w.writerow([r["category"], repr(float(r["mean_lab_distance"])), r["sample_count"]])
    return out_path


_RECORD_KEYS = ("pair_id", "original", "colorized", "mask_kind", "absolute", "relative")


def emit_listing(records: list, json_path, title: str) -> tuple[Path, Path]:
    """Write records as a JSON array and as a plain-text listing for review."""
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(records, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    lines = [title, ""]
    for r in records:
        head = f"#{r['rank']} by {r['by']}" if "rank" in r else ",".join(r.get("reasons", []))
        lines.append(
            f"{head:<16} pair {r['pair_id']:>6}  {r['mask_kind']:<20} "
            f"abs={r['absolute']:.4f} rel={r['relative']:+.4f}  {r['original']} -> {r['colorized']}"
        )
    txt = json_path.with_suffix(".txt")
    txt.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return json_path, txt


def _slug(name: str) -> str:
    return name.replace("*", "star")


def render_outputs(report: RunReport, out_dir, upscale: int = 4) -> list[Path]:
    """Write every figure and table derivable from ``report`` into ``out_dir``."""
    out_dir = Path(out_dir)
    written = []
    for d in report.global_deltas:
        written.append(emit_delta_plot(d, out_dir / "global" / f"delta_{_slug(d.channel)}.png"))
    for g in report.local:
        cat = g.category or "all"
        written.append(
            emit_heatmap(
                g.grid,
                out_dir / "local" / cat / f"shift_{_slug(g.channel)}.png",
                inverted=g.channel == "b*",
                upscale=upscale,
                label=f"{g.channel} shift ({cat}, n={g.sample_count})",
            )
        )
    if report.mud is not None:
        report.mud.save(out_dir / "mud" / "mud.png")
        written.append(out_dir / "mud" / "mud.png")
        if report.mud_delta is not None:
            written.append(
                emit_heatmap(report.mud_delta, out_dir / "mud" / "mud_distance_delta.png",
                             upscale=upscale, label="distance-to-mud delta")
            )
    if report.per_category:
        written.append(emit_category_csv(report.per_category, out_dir / "per_category.csv"))
    if report.regional:
        written.extend(emit_listing(report.regional, out_dir / "regional" / "top_n.json", "Top-n regional shifts"))
    if report.candidates:
        written.extend(
            emit_listing(report.candidates, out_dir / "regional" / "candidates.json", "Study candidates")
        )
    return written
