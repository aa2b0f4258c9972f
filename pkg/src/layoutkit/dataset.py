"""Layout annotation manifests, corpus statistics, sampling plans, anchors.

Manifest format: one JSON document per line, fields exactly
``{document_id, collection, split, height, width, regions: [...]}`` where each
region is ``{category_abbrev, points: [[x, y], ...], score?}``. Coordinates
are image pixels, x right, y down. Prediction manifests use the identical
schema with ``score`` required.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np


class Category(NamedTuple):
    abbrev: str
    name: str


CATEGORIES: tuple[Category, ...] = (
    Category("CLS", "Character Line Segment"),
    Category("CC", "Character Component"),
    Category("Hv", "Hole Virtual"),
    Category("Hp", "Hole Physical"),
    Category("PB", "Page Boundary"),
    Category("LM", "Library Marker"),
    Category("DP", "Decorator/Picture"),
    Category("PD", "Physical Degradation"),
    Category("BL", "Boundary Line"),
)
CATEGORY_ABBREVS: tuple[str, ...] = tuple(c.abbrev for c in CATEGORIES)
COLLECTIONS: tuple[str, ...] = ("PIH", "Bhoomi", "ASR", "Jain")
SPLITS: tuple[str, ...] = ("train", "validation", "test")


class ManifestError(ValueError):
    """Malformed manifest content, with file/line/field context."""


@dataclass
class RegionInstance:
    """One polygonal layout region of a document."""

    document_id: str
    collection: str
    category: str
    polygon: np.ndarray  # (n, 2) pixel coordinates, x right, y down
    score: float | None = None

    def __post_init__(self) -> None:
        self.polygon = np.asarray(self.polygon, dtype=np.float64)


@dataclass
class DocumentRecord:
    """One annotated document image and its regions."""

    document_id: str
    collection: str
    split: str
    height: int
    width: int
    regions: list[RegionInstance] = field(default_factory=list)


def _region_from_json(
    obj: dict, doc_id: str, collection: str, where: str, require_scores: bool
) -> RegionInstance:
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: region entries must be objects")
    try:
        abbrev = obj["category_abbrev"]
        points = obj["points"]
    except KeyError as exc:
        raise ManifestError(f"{where}: region missing field {exc}") from None
    if abbrev not in CATEGORY_ABBREVS:
        raise ManifestError(
            f"{where}: unknown category {abbrev!r}; valid abbreviations are "
            + ", ".join(CATEGORY_ABBREVS)
        )
    try:
        polygon = np.asarray(points, dtype=np.float64)
    except (TypeError, ValueError):
        raise ManifestError(f"{where}: points must be [[x, y], ...]") from None
    if polygon.ndim != 2 or polygon.shape[1] != 2 or polygon.shape[0] < 3:
        raise ManifestError(f"{where}: a polygon needs at least 3 [x, y] vertices")
    if not np.isfinite(polygon).all():
        raise ManifestError(f"{where}: polygon has non-finite coordinates")
    score = obj.get("score")
    if score is None and require_scores:
        raise ManifestError(f"{where}: prediction region is missing its score")
    if score is not None:
        score = float(score)
        if not (0.0 <= score <= 1.0):
            raise ManifestError(f"{where}: score must lie in [0, 1], got {score}")
    return RegionInstance(
        document_id=doc_id,
        collection=collection,
        category=abbrev,
        polygon=polygon,
        score=score,
    )


def load_manifest(path: str | Path, *, require_scores: bool = False) -> list[DocumentRecord]:
    """Parse and validate a manifest file into document records.

    Region polygons falling outside the image are clamped to it, with a
    warning naming the document. Malformed content raises
    :class:`ManifestError` pointing at the offending line and field.
    """
    path = Path(path)
    records: list[DocumentRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path.name}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{where}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ManifestError(f"{where}: each line must hold one document object")
            try:
                doc_id = obj["document_id"]
                collection = obj["collection"]
                split = obj["split"]
                height = obj["height"]
                width = obj["width"]
                regions = obj["regions"]
            except KeyError as exc:
                raise ManifestError(f"{where}: document missing field {exc}") from None
            if not isinstance(doc_id, str) or not doc_id:
                raise ManifestError(f"{where}: document_id must be a non-empty string")
            if doc_id in seen:
                raise ManifestError(f"{where}: duplicate document_id {doc_id!r}")
            if collection not in COLLECTIONS:
                raise ManifestError(
                    f"{where}: unknown collection {collection!r}; valid values are "
                    + ", ".join(COLLECTIONS)
                )
            if split not in SPLITS:
                raise ManifestError(
                    f"{where}: unknown split {split!r}; valid values are " + ", ".join(SPLITS)
                )
            if not isinstance(height, int) or not isinstance(width, int) or height <= 0 or width <= 0:
                raise ManifestError(f"{where}: height and width must be positive integers")
            if not isinstance(regions, list):
                raise ManifestError(f"{where}: regions must be a list")

            record = DocumentRecord(doc_id, collection, split, height, width)
            clamped = 0
            for region_obj in regions:
                region = _region_from_json(
                    region_obj, doc_id, collection, where, require_scores
                )
                inside = (
                    (region.polygon[:, 0] >= 0.0)
                    & (region.polygon[:, 0] <= width)
                    & (region.polygon[:, 1] >= 0.0)
                    & (region.polygon[:, 1] <= height)
                )
                if not inside.all():
                    region.polygon[:, 0] = np.clip(region.polygon[:, 0], 0.0, width)
                    region.polygon[:, 1] = np.clip(region.polygon[:, 1], 0.0, height)
                    clamped += 1
                record.regions.append(region)
            if clamped:
                warnings.warn(
                    f"{where}: clamped {clamped} region polygon(s) of {doc_id!r} "
                    "to the image bounds"
                )
            seen.add(doc_id)
            records.append(record)
    return records


def _coord(value: float) -> float | int:
    return int(value) if float(value).is_integer() else float(value)


def save_manifest(records: list[DocumentRecord], path: str | Path) -> None:
    """Write records in the manifest line format (inverse of load_manifest)."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            regions = []
            for region in rec.regions:
                entry: dict = {
                    "category_abbrev": region.category,
                    "points": [[_coord(x), _coord(y)] for x, y in region.polygon],
                }
                if region.score is not None:
                    entry["score"] = region.score
                regions.append(entry)
            obj = {
                "document_id": rec.document_id,
                "collection": rec.collection,
                "split": rec.split,
                "height": rec.height,
                "width": rec.width,
                "regions": regions,
            }
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


@dataclass
class SplitStats:
    """Document and region count tables in collection x split / category layout."""

    doc_counts: dict[str, dict[str, int]]
    region_counts: dict[str, dict[str, int]]

    def doc_total(self, collection: str) -> int:
        return sum(self.doc_counts[collection].values())

    def split_total(self, split: str) -> int:
        return sum(self.doc_counts[c][split] for c in COLLECTIONS)

    def grand_total(self) -> int:
        return sum(self.doc_total(c) for c in COLLECTIONS)

    def combined_region_count(self, category: str) -> int:
        return sum(self.region_counts[c][category] for c in COLLECTIONS)


def split_stats(records: list[DocumentRecord]) -> SplitStats:
    """Count documents per collection/split and regions per collection/category."""
    doc_counts = {c: {s: 0 for s in SPLITS} for c in COLLECTIONS}
    region_counts = {c: {cat: 0 for cat in CATEGORY_ABBREVS} for c in COLLECTIONS}
    for rec in records:
        doc_counts[rec.collection][rec.split] += 1
        for region in rec.regions:
            region_counts[rec.collection][region.category] += 1
    return SplitStats(doc_counts=doc_counts, region_counts=region_counts)


def repeat_factors(records: list[DocumentRecord], threshold: float = 0.001) -> dict[str, float]:
    """Per-document oversampling factors for the train split.

    With ``f(c)`` the fraction of train documents containing category ``c``,
    the category factor is ``max(1, sqrt(threshold / f(c)))`` and a document's
    factor is the max over the categories it contains (1.0 when it has none).
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    train = [rec for rec in records if rec.split == "train"]
    if not train:
        raise ValueError("manifest has no train-split documents")

    containing: dict[str, int] = {cat: 0 for cat in CATEGORY_ABBREVS}
    doc_cats: dict[str, set[str]] = {}
    for rec in train:
        cats = {region.category for region in rec.regions}
        doc_cats[rec.document_id] = cats
        for cat in cats:
            containing[cat] += 1

    n = len(train)
    cat_factor = {
        cat: max(1.0, math.sqrt(threshold / (count / n)))
        for cat, count in containing.items()
        if count > 0
    }
    return {
        doc_id: max((cat_factor[c] for c in cats), default=1.0)
        for doc_id, cats in doc_cats.items()
    }


def generate_anchors(
    sizes: tuple[float, ...] = (32, 64, 128, 256, 512),
    ratios: tuple[float, ...] = (0.5, 1.0, 2.0),
) -> np.ndarray:
    """(width, height) box templates with area size^2 and height/width = ratio."""
    if any(s <= 0 for s in sizes) or any(r <= 0 for r in ratios):
        raise ValueError("anchor sizes and ratios must be positive")
    anchors = []
    for size in sizes:
        for ratio in ratios:
            root = math.sqrt(ratio)
            anchors.append((size / root, size * root))
    return np.array(anchors, dtype=np.float64)
