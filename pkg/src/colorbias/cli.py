"""Command-line entry point.

Subcommands: analyze, regional, grayscale, mud, synth, report, manifest.
Exit codes: 0 success, 1 finished but some pairs were skipped, 2 bad
configuration or unloadable manifest, 3 I/O failure.

Settings resolve as command-line flags, then a ``--config`` JSON file, then
built-in defaults. ``COLORBIAS_THREADS`` sets only the default thread count.
Progress goes to stderr; stdout carries a one-line JSON summary.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .dataset import ManifestError, export_grayscale, load_manifest, manifest_from_tree
from .metrics_local import GRID, MudImage
from .pipeline import ANALYSES, AnalysisConfig, analyze, compute_mud_from_manifest, default_threads
from .report import emit_json, load_json, render_outputs

log = logging.getLogger("colorbias")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

DEFAULTS = {
    "grid": GRID,
    "top_n": 5,
    "candidates": 400,
    "threads": None,  # resolved from the environment
    "dot_size": 6,
    "upscale": 4,
    "categories": None,
    "mud_reference": None,
    "mud_json": None,
    "heatmaps": True,
}


class ConfigError(Exception):
    pass


def _summary(**kw) -> None:
    print(json.dumps(kw, sort_keys=True))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with default settings")
    p.add_argument("--grid", type=int, help=f"cell grid size (default {GRID})")
    p.add_argument("--threads", type=int, help="worker threads (default $COLORBIAS_THREADS or 1)")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")


def _add_analysis(p: argparse.ArgumentParser, with_selection: bool) -> None:
    p.add_argument("--manifest", type=Path, help="pair manifest (.csv or .json)")
    p.add_argument("--out", type=Path, help="output directory")
    if with_selection:
        for name in ANALYSES:
            p.add_argument(f"--{name}", dest=f"run_{name}", action="store_true", help=f"run the {name} analysis")
        p.add_argument("--all", action="store_true", help="run every analysis")
    p.add_argument("--mud-reference", type=Path, help="manifest whose originals define the mud image")
    p.add_argument("--mud-json", type=Path, help="precomputed mud image (JSON sidecar)")
    p.add_argument("--categories", help="comma-separated category filter")
    p.add_argument("--top-n", type=int, help="entries per regional top-n list (default 5)")
    p.add_argument("--candidates", type=int, help="study candidate count (default 400)")
    p.add_argument("--dot-size", type=int, help="side of intersection patches in cells (default 6)")
    p.add_argument("--upscale", type=int, help="integer heatmap upscale factor (default 4)")
    p.add_argument("--no-heatmaps", dest="heatmaps", action="store_false", default=None,
                   help="write report.json only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colorbias", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="run bias analyses over a pair manifest")
    _add_analysis(p, with_selection=True)
    _add_common(p)

    p = sub.add_parser("regional", help="regional scores, top-n lists and study candidates only")
    _add_analysis(p, with_selection=False)
    _add_common(p)

    p = sub.add_parser("grayscale", help="write luma images for every manifest entry")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--replicate", action="store_true", help="write 3 identical channels instead of 1")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("mud", help="compute the mean-color (mud) image of a reference manifest")
    p.add_argument("--reference", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic paired corpus")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("-n", "--count", type=int, default=20)
    p.add_argument("--transform", choices=("identity", "channel_offset", "saturation_scale", "mud_blend"),
                   default="identity")
    p.add_argument("--channel", choices=("R", "G", "B"), default="B")
    p.add_argument("--amount", type=int, default=10)
    p.add_argument("--factor", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--mud-json", type=Path, help="mud image for mud_blend")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-size", type=int, default=64)
    p.add_argument("--max-size", type=int, default=512)
    p.add_argument("--lo", type=int, default=0, help="lowest generated channel value")
    p.add_argument("--hi", type=int, default=255, help="highest generated channel value")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("report", help="re-render figures and tables from a report.json")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--upscale", type=int, default=4)
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("manifest", help="build a manifest from an ADE20K-style directory tree")
    p.add_argument("--originals", type=Path, required=True)
    p.add_argument("--colorized", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--suffix", default=".png", help="file suffix of colorized images")
    p.add_argument("--quiet", action="store_true")
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    """Merge flags over the config file over defaults."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(file_cfg) - set(DEFAULTS) - {"manifest", "out", "analyses", "reference"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        settings.update(file_cfg)
    for key in list(DEFAULTS) + ["manifest", "out", "reference"]:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if settings["threads"] is None:
        settings["threads"] = default_threads()
    for key in ("manifest", "out", "mud_reference", "mud_json", "reference"):
        if settings.get(key) is not None:
            settings[key] = Path(settings[key])
    if isinstance(settings["categories"], str):
        settings["categories"] = [c.strip() for c in settings["categories"].split(",") if c.strip()]
    selected = [a for a in ANALYSES if getattr(args, f"run_{a}", False)]
    if getattr(args, "all", False):
        selected = list(ANALYSES)
    if selected:
        settings["analyses"] = selected
    return settings


def _cmd_analyze(args, regional_only: bool = False) -> int:
    s = resolve_settings(args)
    if regional_only:
        s["analyses"] = ["regional"]
    if not s.get("manifest") or not s.get("out"):
        raise ConfigError("--manifest and --out are required")
    if not s.get("analyses"):
        raise ConfigError("no analyses enabled (use --all or --global/--local/--mud/--regional)")
    try:
        config = AnalysisConfig(
            analyses=tuple(s["analyses"]),
            grid=int(s["grid"]),
            top_n=int(s["top_n"]),
            candidates=int(s["candidates"]),
            threads=int(s["threads"]),
            dot_size=int(s["dot_size"]),
            progress_interval=0.0 if args.quiet else 5.0,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        manifest = load_manifest(s["manifest"])
    except ManifestError as exc:
        raise ConfigError(str(exc)) from exc
    if s["categories"]:
        manifest = manifest.filter(s["categories"])

    mud = mud_source = None
    if "mud" in config.analyses:
        if s["mud_json"]:
            mud = MudImage.load(s["mud_json"])
            mud_source = f"json:{Path(s['mud_json']).name}"
        elif s["mud_reference"]:
            try:
                ref = load_manifest(s["mud_reference"])
            except ManifestError as exc:
                raise ConfigError(str(exc)) from exc
            mud = compute_mud_from_manifest(ref, config.grid, config.threads)
            mud_source = f"reference manifest sha256:{ref.digest}"
        if mud is not None and mud.grid.size != config.grid:
            raise ConfigError(f"mud grid {mud.grid.size} does not match --grid {config.grid}")

    report = analyze(manifest, config, mud=mud, mud_source=mud_source)
    out = Path(s["out"])
    path = emit_json(report, out / "report.json")
    if s["heatmaps"]:
        render_outputs(report, out, upscale=int(s["upscale"]))
    skipped = report.counts["skipped"]
    _summary(report=str(path), processed=report.counts["processed"], skipped=skipped)
    if skipped:
        log.error("%d of %d pairs could not be loaded:", skipped, report.counts["entries"])
        for item in report.skipped:
            log.error("  pair %d (%s): %s", item["pair_id"], item["original"], item["error"])
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_grayscale(args) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except ManifestError as exc:
        raise ConfigError(str(exc)) from exc
    count = export_grayscale(manifest, args.out, replicate=args.replicate)
    _summary(written=count, out=str(args.out))
    return EXIT_OK


def _cmd_mud(args) -> int:
    s = resolve_settings(args)
    try:
        ref = load_manifest(s["reference"])
    except ManifestError as exc:
        raise ConfigError(str(exc)) from exc
    from .dataset import SkipLog

    skips = SkipLog()
    try:
        mud = compute_mud_from_manifest(ref, int(s["grid"]), int(s["threads"]), skips)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sidecar = mud.save(Path(s["out"]) / "mud.png")
    _summary(mud=str(sidecar), source_count=mud.source_count, skipped=len(skips))
    return EXIT_PARTIAL if len(skips) else EXIT_OK


def _cmd_synth(args) -> int:
    from .synth import SyntheticTransform, make_corpus

    if args.transform == "identity":
        t = SyntheticTransform()
    elif args.transform == "channel_offset":
        t = SyntheticTransform.channel_offset(args.channel, args.amount)
    elif args.transform == "saturation_scale":
        t = SyntheticTransform.saturation_scale(args.factor)
    else:
        if not args.mud_json:
            raise ConfigError("mud_blend needs --mud-json")
        t = SyntheticTransform.mud_blend(args.alpha, MudImage.load(args.mud_json))
    manifest = make_corpus(args.out, args.count, t, args.seed, args.min_size, args.max_size, args.lo, args.hi)
    _summary(manifest=str(manifest), count=args.count, transform=args.transform)
    return EXIT_OK


def _cmd_report(args) -> int:
    try:
        report = load_json(args.report)
    except (json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot parse {args.report}: {exc}") from exc
    written = render_outputs(report, args.out, upscale=args.upscale)
    _summary(written=len(written), out=str(args.out))
    return EXIT_OK


def _cmd_manifest(args) -> int:
    path = manifest_from_tree(args.originals, args.colorized, args.out, args.suffix)
    _summary(manifest=str(path), entries=len(load_manifest(path)))
    return EXIT_OK


COMMANDS = {
    "analyze": _cmd_analyze,
    "regional": lambda a: _cmd_analyze(a, regional_only=True),
    "grayscale": _cmd_grayscale,
    "mud": _cmd_mud,
    "synth": _cmd_synth,
    "report": _cmd_report,
    "manifest": _cmd_manifest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO
