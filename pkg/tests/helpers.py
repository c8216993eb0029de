"""Pipeline-versus-oracle comparison shared by several test modules."""

import numpy as np

from colorbias.metrics_global import CHANNELS, accumulate_histograms, all_deltas
from colorbias.metrics_local import LOCAL_CHANNELS, LocalAccumulator, MudImage, compute_mud, pair_cells
from colorbias.metrics_regional import all_masks, summarize_pair
from colorbias.synth import oracle_metrics
from conftest import pair_of


def pipeline_metrics(origs, cols, mud: MudImage | None = None, grid=64):
    pairs = [pair_of(o, c, pair_id=i) for i, (o, c) in enumerate(zip(origs, cols))]
    ho, hc = accumulate_histograms(pairs)
    acc = LocalAccumulator(grid, mud=mud)
    masks = all_masks(grid)
    summaries = []
    for p in pairs:
        pc = pair_cells(p, grid)
        acc.add(pc)
        summaries.append(summarize_pair(pc, masks))
    return {
        "hist": (ho, hc),
        "deltas": {d.channel: d.delta for d in all_deltas(ho, hc)},
        "shifts": {ch: acc.shift_grid(ch).grid.cells for ch in LOCAL_CHANNELS},
        "mean_distance": acc.mean_distance(),
        "mud_delta": acc.mud_delta().cells if mud is not None else None,
        "regional": summaries,
    }


def max_errors(origs, cols, mud=None, reference=None, grid=64):
    """Largest absolute pipeline/oracle disagreement per statistic."""
    if mud is None and reference is not None:
        mud = compute_mud(reference, grid)
    got = pipeline_metrics(origs, cols, mud, grid)
    want = oracle_metrics(origs, cols, grid, mud=None if mud is None else mud.grid.cells)
    err = {}
    ho, hc = got["hist"]
    err["histogram_counts"] = max(
        int(np.abs(h[ch].counts - np.asarray(want["histograms"][side][ch])).max())
        for side, h in (("original", ho), ("colorized", hc))
        for ch in CHANNELS
    )
    err["deltas"] = max(float(np.abs(got["deltas"][ch] - want["deltas"][ch]).max()) for ch in CHANNELS)
    for ch in LOCAL_CHANNELS:
        err[f"shift_{ch}"] = float(np.abs(got["shifts"][ch] - np.asarray(want["shifts"][ch])).max())
    err["mean_distance"] = abs(got["mean_distance"] - want["mean_distance"])
    if mud is not None:
        err["mud_delta"] = float(np.abs(got["mud_delta"] - np.asarray(want["mud_delta"])).max())
    reg = 0.0
    for summary, scores in zip(got["regional"], want["regional"]):
        for kind, (absolute, relative) in scores.items():
            s = summary.scores[kind]
            reg = max(reg, abs(s.absolute - absolute), abs(s.relative - relative))
    err["regional"] = reg
    return err, got, want
