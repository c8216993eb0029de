"""Manifest loading, pair decoding, and grayscale export."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from PIL import Image

from .color import luma_array

log = logging.getLogger(__name__)

# ADE20K scene categories, plus a catch-all.
CATEGORIES = (
    "urban",
    "home_or_hotel",
    "nature_landscape",
    "unclassified",
    "workplace",
    "sports_and_leisure",
    "cultural",
    "shopping_and_dining",
    "transportation",
    "industrial",
    "other",
)

_ALIASES = {
    "home": "home_or_hotel",
    "hotel": "home_or_hotel",
    "nature": "nature_landscape",
    "work": "workplace",
    "work_place": "workplace",
    "sports": "sports_and_leisure",
    "shopping": "shopping_and_dining",
}

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


class ManifestError(ValueError):
    pass


class PairError(Exception):
    """A single pair could not be loaded; the batch continues without it."""


class DimensionMismatch(PairError):
    pass


def normalize_category(name: str) -> str | None:
    """Map a free-form category label to a known slug, or None if unknown."""
    slug = "_".join(name.strip().lower().replace("-", " ").replace("/", " ").split())
    slug = _ALIASES.get(slug, slug)
    return slug if slug in CATEGORIES else None


@dataclass(frozen=True)
class ManifestEntry:
    index: int
    original: Path
    colorized: Path | None
    category: str


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]
    source: Path | None = None
    digest: str = ""
    warnings: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def filter(self, categories: Iterable[str]) -> "Manifest":
        keep = set(categories)
        return Manifest(
            tuple(e for e in self.entries if e.category in keep),
            self.source,
            self.digest,
            self.warnings,
        )


def _read_rows(path: Path) -> list[dict]:
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        data = json.loads(text)
        if isinstance(data, dict):
            data = data.get("entries", [])
        if not isinstance(data, list):
            raise ManifestError(f"{path}: expected a list of entries")
        return data
    reader = csv.DictReader(text.splitlines())
    if reader.fieldnames is None:
        return []
    missing = {"original", "category"} - set(reader.fieldnames)
    if missing:
        raise ManifestError(f"{path}: header lacks {sorted(missing)}")
    return list(reader)


def load_manifest(path) -> Manifest:
    """Load a CSV (``original,colorized,category``) or JSON manifest.

    Relative paths resolve against the manifest's directory. Unknown
    categories become ``"other"`` and produce a warning.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    raw = path.read_bytes()
    try:
        rows = _read_rows(path)
    except (json.JSONDecodeError, csv.Error, UnicodeDecodeError) as exc:
        raise ManifestError(f"{path}: {exc}") from exc

    base = path.parent
    entries = []
    warnings = []
    seen: dict[str, int] = {}
    for lineno, row in enumerate(rows, start=1):
        if not isinstance(row, dict):
            raise ManifestError(f"{path}: row {lineno} is not a record")
        original = (row.get("original") or "").strip()
        colorized = (row.get("colorized") or "").strip()
        category = (row.get("category") or "").strip()
        if not original:
            raise ManifestError(f"{path}: row {lineno} has an empty original path")
        if original in seen:
            raise ManifestError(
                f"{path}: duplicate original path {original!r} (rows {seen[original]} and {lineno})"
            )
        seen[original] = lineno
        slug = normalize_category(category)
        if slug is None:
            warnings.append(f"row {lineno}: unknown category {category!r} mapped to 'other'")
            log.warning("%s: row %d: unknown category %r mapped to 'other'", path, lineno, category)
            slug = "other"
        entries.append(
            ManifestEntry(
                index=len(entries),
                original=base / original,
                colorized=(base / colorized) if colorized else None,
                category=slug,
            )
        )
    return Manifest(tuple(entries), path, hashlib.sha256(raw).hexdigest(), tuple(warnings))


def write_manifest(path, rows: Iterable[tuple[str, str, str]]) -> Path:
    """Write ``(original, colorized, category)`` rows as a CSV manifest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["original", "colorized", "category"])
        for row in rows:
            writer.writerow(row)
    return path


def manifest_from_tree(original_root, colorized_root, out_path, colorized_suffix=".png") -> Path:
    """Build a manifest from an ADE20K-style directory tree.

    The category is the first path component (relative to ``original_root``)
    naming a known category, e.g. ``training/urban/street/ADE_x.jpg``.
    Colorized files are expected at the same relative path under
    ``colorized_root`` with ``colorized_suffix``.
    """
    original_root = Path(original_root)
    colorized_root = Path(colorized_root)
    out_path = Path(out_path)
    rows = []
    for src in sorted(p for p in original_root.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES):
        rel = src.relative_to(original_root)
        category = next(
            (c for c in (normalize_category(part) for part in rel.parts[:-1]) if c), "other"
        )
        col = (colorized_root / rel).with_suffix(colorized_suffix)
        rows.append(
            (
                os.path.relpath(src, out_path.parent),
                os.path.relpath(col, out_path.parent),
                category,
            )
        )
    return write_manifest(out_path, rows)


def _is_16bit_png(path: Path) -> bool:
    with path.open("rb") as fh:
        head = fh.read(25)
    return head[:8] == b"\x89PNG\r\n\x1a\n" and len(head) == 25 and head[24] == 16


def _to_rgb8_from_16(arr: np.ndarray) -> np.ndarray:
    # Round to nearest: v * 255 / 65535 == v / 257.
    return ((arr.astype(np.uint32) * 255 + 32767) // 65535).astype(np.uint8)


def decode_image(path) -> tuple[np.ndarray, bool]:
    """Decode an image to an (H, W, 3) uint8 RGB array.

    Returns ``(raster, converted)`` where ``converted`` is True when the
    source was not already 8-bit RGB (grayscale, palette, alpha, 16-bit).
    16-bit samples are rounded to the nearest 8-bit value.
    """
    path = Path(path)
    try:
        if _is_16bit_png(path):
            import cv2

            arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
            if arr is None:
                raise PairError(f"cannot decode {path}")
            if arr.ndim == 2:
                arr = np.repeat(arr[:, :, None], 3, axis=2)
            else:
                arr = arr[:, :, 2::-1] if arr.shape[2] >= 3 else np.repeat(arr[:, :, :1], 3, axis=2)
            if arr.dtype == np.uint16:
                arr = _to_rgb8_from_16(arr)
            return np.ascontiguousarray(arr, dtype=np.uint8), True
        with Image.open(path) as im:
            if im.mode == "RGB":
                return np.asarray(im, dtype=np.uint8).copy(), False
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im).astype(np.int64)
                arr = _to_rgb8_from_16(np.clip(arr, 0, 65535))
                return np.repeat(arr[:, :, None], 3, axis=2), True
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy(), True
    except PairError:
        raise
    except (OSError, ValueError) as exc:
        raise PairError(f"cannot decode {path}: {exc}") from exc


@dataclass
class ImagePair:
    original: np.ndarray
    colorized: np.ndarray
    category: str = "other"
    pair_id: int = 0
    converted: bool = False

    def __post_init__(self):
        if self.original.shape != self.colorized.shape:
            raise DimensionMismatch(
                f"pair {self.pair_id}: original {self.original.shape[1]}x{self.original.shape[0]}"
                f" vs colorized {self.colorized.shape[1]}x{self.colorized.shape[0]}"
            )
        if self.original.ndim != 3 or self.original.shape[2] != 3 or min(self.original.shape[:2]) < 1:
            raise PairError(f"pair {self.pair_id}: raster must be a nonempty HxWx3 array")


def load_pair(entry: ManifestEntry) -> ImagePair:
    if entry.colorized is None:
        raise PairError(f"entry {entry.index} has no colorized path")
    original, c1 = decode_image(entry.original)
    colorized, c2 = decode_image(entry.colorized)
    return ImagePair(original, colorized, entry.category, entry.index, c1 or c2)


@dataclass
class SkipLog:
    """Pairs that failed to load, in manifest order."""

    skipped: list[dict] = field(default_factory=list)

    def add(self, entry: ManifestEntry, exc: Exception) -> None:
        log.warning("skipping pair %d: %s", entry.index, exc)
        self.skipped.append({"pair_id": entry.index, "original": str(entry.original), "error": str(exc)})

    def __len__(self) -> int:
        return len(self.skipped)


def iter_pairs(manifest: Manifest, skips: SkipLog | None = None) -> Iterator[ImagePair]:
    """Yield decodable pairs in manifest order, recording failures in ``skips``."""
    for entry in manifest:
        try:
            yield load_pair(entry)
        except PairError as exc:
            if skips is not None:
                skips.add(entry, exc)


def export_grayscale(manifest: Manifest, out_dir, replicate: bool = False) -> int:
    """Write one luma image per manifest entry into ``out_dir``.

    Files are named after the entry index and original stem so repeated stems
    in different directories cannot collide. With ``replicate`` the luma is
    written as three identical channels instead of a single channel.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory not writable: {out_dir}")
    written = 0
    for entry in manifest:
        raster, _ = decode_image(entry.original)
        y = luma_array(raster)
        if replicate:
            img = Image.fromarray(np.repeat(y[:, :, None], 3, axis=2), mode="RGB")
        else:
            img = Image.fromarray(y, mode="L")
        img.save(grayscale_name(out_dir, entry))
        written += 1
    return written


def grayscale_name(out_dir: Path, entry: ManifestEntry) -> Path:
    return Path(out_dir) / f"{entry.index:06d}_{entry.original.stem}.png"
