"""Instance matching, average precision, and the aggregated metric report.

Matching and average precision are computed in exact rational arithmetic:
IoU values are fractions of pixel counts and confidence thresholds are
fractions, so threshold comparisons never hinge on float rounding and AP is
exact until the final float conversion.

Average precision uses the all-point interpolation of the precision-recall
curve (precision envelope). Predictions with equal confidence enter the
curve together, as one cutoff, which makes the curve independent of their
relative order. Predictions are pooled across documents per category, but a
prediction can only match ground truth of its own document.

The report aggregates at four scopes. Hausdorff-family values and IoU are
computed on pairs matched at IoU >= 0.5 only:

* ``document``  - mean over the document's matched pairs;
* ``overall``   - mean of the document means (documents with no matched
  pair do not contribute);
* ``collection``- the overall rule restricted to one collection;
* ``category``  - mean pooled over all matched pairs sharing the label.

AP columns at every scope are the mean over categories with at least one
ground-truth region in scope; categories without ground truth are excluded
from the mean and show an empty cell in their own row.

Documents are independent units of work: ``EvalConfig.jobs > 1`` fans the
per-document evaluation out to a process pool, and the report is assembled
from the results in sorted document order, so any parallelism degree yields
byte-identical output.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .dataset import CATEGORY_ABBREVS, COLLECTIONS, DocumentRecord, RegionInstance
from .distances import avg_hausdorff, boundary_points, hausdorff, hd95
from .rasterize import polygon_pixel_counts

DEFAULT_IOU_THRESHOLDS: tuple[Fraction, ...] = tuple(
    Fraction(t, 100) for t in range(50, 100, 5)
)
HD_MATCH_THRESHOLD = Fraction(1, 2)

METRIC_COLUMNS = ("HD", "HD95", "AvgHD", "IoU", "AP", "AP50", "AP75")


@dataclass(frozen=True)
class Match:
    gt_index: int
    pred_index: int
    iou: Fraction


@dataclass(frozen=True)
class MatchResult:
    threshold: Fraction
    matches: tuple[Match, ...]
    unmatched_gt: tuple[int, ...]
    unmatched_pred: tuple[int, ...]


def _require_scores(preds: list[RegionInstance]) -> None:
    for i, pred in enumerate(preds):
        if pred.score is None:
            raise ValueError(f"prediction {i} has no confidence score")


def _default_raster(instances: list[RegionInstance]) -> tuple[int, int]:
    xs = max(float(inst.polygon[:, 0].max()) for inst in instances)
    ys = max(float(inst.polygon[:, 1].max()) for inst in instances)
    return int(math.ceil(ys)) + 1, int(math.ceil(xs)) + 1


def iou_matrix(
    gts: list[RegionInstance], preds: list[RegionInstance], raster: tuple[int, int]
) -> list[list[Fraction]]:
    """Exact rasterized IoU for every (gt, pred) pair."""
    height, width = raster
    out = []
    for gt in gts:
        row = []
        for pred in preds:
            inter, union = polygon_pixel_counts(gt.polygon, pred.polygon, height, width)
            row.append(Fraction(inter, union) if union else Fraction(0))
        out.append(row)
    return out


def _greedy_match(
    ious: list[list[Fraction]],
    scores: list[float],
    threshold: Fraction,
) -> list[tuple[int, int, Fraction]]:
    """Greedy matching: predictions by descending score (ties keep input
    order), each taking the unmatched GT with the highest IoU >= threshold."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    taken: set[int] = set()
    matches = []
    for pi in order:
        best_gi = -1
        best_iou = Fraction(0)
        for gi in range(len(ious)):
            if gi in taken:
                continue
            iou = ious[gi][pi]
            if iou >= threshold and iou > best_iou:
                best_gi, best_iou = gi, iou
        if best_gi >= 0:
            taken.add(best_gi)
            matches.append((best_gi, pi, best_iou))
    return matches


def match_instances(
    gts: list[RegionInstance],
    preds: list[RegionInstance],
    iou_threshold: float | Fraction,
    raster: tuple[int, int] | None = None,
    ious: list[list[Fraction]] | None = None,
) -> MatchResult:
    """Match predictions of one document and category against ground truth."""
    keys = {(inst.document_id, inst.category) for inst in gts + preds}
    if len(keys) > 1:
        raise ValueError("all instances must share document_id and category")
    _require_scores(preds)
    threshold = Fraction(iou_threshold)
    if ious is None:
        if raster is None:
            raster = _default_raster(gts + preds) if gts or preds else (1, 1)
        ious = iou_matrix(gts, preds, raster)
    matched = _greedy_match(ious, [p.score for p in preds], threshold)
    matched_gt = {gi for gi, _, _ in matched}
    matched_pred = {pi for _, pi, _ in matched}
    return MatchResult(
        threshold=threshold,
        matches=tuple(Match(gi, pi, iou) for gi, pi, iou in matched),
        unmatched_gt=tuple(i for i in range(len(gts)) if i not in matched_gt),
        unmatched_pred=tuple(i for i in range(len(preds)) if i not in matched_pred),
    )


# ---------------------------------------------------------------------------
# average precision
# ---------------------------------------------------------------------------


def _ap_from_pool(
    samples: list[tuple[float, tuple, bool]], n_gt: int
) -> Fraction:
    """All-point-interpolated AP from pooled (score, tiebreak, tp) samples.

    Samples with equal score form a single cutoff. ``n_gt`` must be positive;
    AP without ground truth is undefined.
    """
    if n_gt <= 0:
        raise ValueError("average precision is undefined with zero ground-truth instances")
    if not samples:
        return Fraction(0)
    ordered = sorted(samples, key=lambda s: (-s[0], s[1]))
    points: list[tuple[Fraction, Fraction]] = []
    tp = fp = 0
    i = 0
    while i < len(ordered):
        j = i
        while j < len(ordered) and ordered[j][0] == ordered[i][0]:
            if ordered[j][2]:
                tp += 1
            else:
                fp += 1
            j += 1
        points.append((Fraction(tp, n_gt), Fraction(tp, tp + fp)))
        i = j
    # envelope sweep from the lowest cutoff upward
    ap = Fraction(0)
    best = Fraction(0)
    for k in range(len(points) - 1, -1, -1):
        recall, precision = points[k]
        best = max(best, precision)
        lower = points[k - 1][0] if k > 0 else Fraction(0)
        ap += (recall - lower) * best
    return ap


def _group_by_document(instances: list[RegionInstance]) -> dict[str, list[RegionInstance]]:
    grouped: dict[str, list[RegionInstance]] = defaultdict(list)
    for inst in instances:
        grouped[inst.document_id].append(inst)
    return grouped


def _ap_for_thresholds(
    gts: list[RegionInstance],
    preds: list[RegionInstance],
    thresholds: tuple[Fraction, ...],
    rasters: dict[str, tuple[int, int]] | None,
) -> dict[Fraction, Fraction]:
    categories = {inst.category for inst in gts + preds}
    if len(categories) > 1:
        raise ValueError("instances must all share one category")
    _require_scores(preds)
    if not gts:
        raise ValueError("average precision is undefined with zero ground-truth instances")
    gt_docs = _group_by_document(gts)
    pred_docs = _group_by_document(preds)
    per_doc: dict[str, list[list[Fraction]]] = {}
    for doc_id in sorted(set(gt_docs) | set(pred_docs)):
        doc_gts = gt_docs.get(doc_id, [])
        doc_preds = pred_docs.get(doc_id, [])
        if rasters is not None and doc_id in rasters:
            raster = rasters[doc_id]
        else:
            raster = _default_raster(doc_gts + doc_preds)
        per_doc[doc_id] = iou_matrix(doc_gts, doc_preds, raster)

    out: dict[Fraction, Fraction] = {}
    for threshold in thresholds:
        pool: list[tuple[float, tuple, bool]] = []
        for doc_id in sorted(per_doc):
            doc_preds = pred_docs.get(doc_id, [])
            matched = _greedy_match(
                per_doc[doc_id], [p.score for p in doc_preds], threshold
            )
            hits = {pi for _, pi, _ in matched}
            for rank, pred in enumerate(doc_preds):
                pool.append((pred.score, (doc_id, rank), rank in hits))
        out[threshold] = _ap_from_pool(pool, len(gts))
    return out


def average_precision(
    gts: list[RegionInstance],
    preds: list[RegionInstance],
    iou_threshold: float | Fraction,
    rasters: dict[str, tuple[int, int]] | None = None,
) -> float:
    """AP of one category at one IoU threshold, pooled across documents."""
    threshold = Fraction(iou_threshold)
    return float(_ap_for_thresholds(gts, preds, (threshold,), rasters)[threshold])


def ap_range(
    gts: list[RegionInstance],
    preds: list[RegionInstance],
    thresholds: tuple[Fraction, ...] = DEFAULT_IOU_THRESHOLDS,
    rasters: dict[str, tuple[int, int]] | None = None,
) -> float:
    """Mean AP over the IoU threshold range (default 0.50 to 0.95, step 0.05)."""
    values = _ap_for_thresholds(gts, preds, tuple(thresholds), rasters)
    return float(sum(values.values()) / len(values))


# ---------------------------------------------------------------------------
# per-document evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalConfig:
    iou_thresholds: tuple[Fraction, ...] = DEFAULT_IOU_THRESHOLDS
    spacing: float = 1.0
    jobs: int = 1


@dataclass
class PairMetrics:
    """Boundary and area metrics of one matched (gt, pred) pair."""

    document_id: str
    collection: str
    category: str
    hd: float
    hd95: float
    avg_hd: float
    iou: float


@dataclass
class DocumentEvaluation:
    document_id: str
    collection: str
    gt_counts: dict[str, int]
    pred_counts: dict[str, int]
    pairs: list[PairMetrics] = field(default_factory=list)
    # threshold -> category -> [(score, rank, tp)]
    ap_samples: dict[Fraction, dict[str, list[tuple[float, int, bool]]]] = field(
        default_factory=dict
    )


def _evaluate_document(
    record: DocumentRecord,
    preds: list[RegionInstance],
    thresholds: tuple[Fraction, ...],
    spacing: float,
) -> DocumentEvaluation:
    raster = (record.height, record.width)
    gt_by_cat: dict[str, list[RegionInstance]] = defaultdict(list)
    for region in record.regions:
        gt_by_cat[region.category].append(region)
    pred_by_cat: dict[str, list[RegionInstance]] = defaultdict(list)
    for pred in preds:
        pred_by_cat[pred.category].append(pred)

    result = DocumentEvaluation(
        document_id=record.document_id,
        collection=record.collection,
        gt_counts={cat: len(v) for cat, v in gt_by_cat.items()},
        pred_counts={cat: len(v) for cat, v in pred_by_cat.items()},
        ap_samples={t: defaultdict(list) for t in thresholds},
    )
    for cat in sorted(set(gt_by_cat) | set(pred_by_cat)):
        cat_gts = gt_by_cat.get(cat, [])
        cat_preds = pred_by_cat.get(cat, [])
        ious = iou_matrix(cat_gts, cat_preds, raster)
        scores = [p.score for p in cat_preds]
        for threshold in thresholds:
            matched = _greedy_match(ious, scores, threshold)
            hits = {pi for _, pi, _ in matched}
            result.ap_samples[threshold][cat] = [
                (scores[rank], rank, rank in hits) for rank in range(len(cat_preds))
            ]
            if threshold == HD_MATCH_THRESHOLD:
                for gi, pi, iou in sorted(matched):
                    gt_pts = boundary_points(cat_gts[gi].polygon, spacing)
                    pred_pts = boundary_points(cat_preds[pi].polygon, spacing)
                    result.pairs.append(
                        PairMetrics(
                            document_id=record.document_id,
                            collection=record.collection,
                            category=cat,
                            hd=hausdorff(gt_pts, pred_pts),
                            hd95=hd95(gt_pts, pred_pts),
                            avg_hd=avg_hausdorff(gt_pts, pred_pts),
                            iou=float(iou),
                        )
                    )
    return result


def _evaluate_document_star(args) -> DocumentEvaluation:
    return _evaluate_document(*args)


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------


@dataclass
class ReportRow:
    scope: str
    key: str
    documents: int
    gt_regions: int
    pred_regions: int
    matched_pairs: int
    hd: float | None = None
    hd95: float | None = None
    avg_hd: float | None = None
    iou: float | None = None
    ap: float | None = None
    ap50: float | None = None
    ap75: float | None = None


@dataclass
class MetricReport:
    rows: list[ReportRow]

    def row(self, scope: str, key: str) -> ReportRow:
        for row in self.rows:
            if row.scope == scope and row.key == key:
                return row
        raise KeyError((scope, key))

    def to_csv(self) -> str:
        """Fixed-layout CSV; metric columns ordered HD, HD95, AvgHD, IoU,
        AP, AP50, AP75. IoU and AP are printed on the 100 scale with two
        decimals, HD values in pixels with two decimals."""
        lines = [
            "scope,key,documents,gt_regions,pred_regions,matched_pairs,"
            + ",".join(METRIC_COLUMNS)
        ]
        for row in self.rows:
            cells = [
                row.scope,
                row.key,
                str(row.documents),
                str(row.gt_regions),
                str(row.pred_regions),
                str(row.matched_pairs),
                _fmt(row.hd),
                _fmt(row.hd95),
                _fmt(row.avg_hd),
                _fmt(row.iou, scale=100.0),
                _fmt(row.ap, scale=100.0),
                _fmt(row.ap50, scale=100.0),
                _fmt(row.ap75, scale=100.0),
            ]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        """Full-precision report; IoU and AP on the raw [0, 1] scale."""

        def rowdict(row: ReportRow) -> dict:
            return {
                "documents": row.documents,
                "gt_regions": row.gt_regions,
                "pred_regions": row.pred_regions,
                "matched_pairs": row.matched_pairs,
                "hd": row.hd,
                "hd95": row.hd95,
                "avg_hd": row.avg_hd,
                "iou": row.iou,
                "ap": row.ap,
                "ap50": row.ap50,
                "ap75": row.ap75,
            }

        obj = {
            "overall": rowdict(self.row("overall", "all")),
            "per_collection": {
                row.key: rowdict(row) for row in self.rows if row.scope == "collection"
            },
            "per_category": {
                row.key: rowdict(row) for row in self.rows if row.scope == "category"
            },
            "per_document": {
                row.key: rowdict(row) for row in self.rows if row.scope == "document"
            },
        }
        return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _fmt(value: float | None, scale: float = 1.0) -> str:
    return "" if value is None else f"{value * scale:.2f}"


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def _mean_fraction(values: list[Fraction]) -> float | None:
    if not values:
        return None
    return float(sum(values, Fraction(0)) / len(values))


def evaluate_manifests(
    gt_records: list[DocumentRecord],
    pred_records: list[DocumentRecord],
    config: EvalConfig = EvalConfig(),
) -> MetricReport:
    """Run the full evaluation protocol and build the aggregated report."""
    gt_by_id = {rec.document_id: rec for rec in gt_records}
    if not gt_by_id:
        raise ValueError("ground-truth manifest has no documents")
    pred_regions: dict[str, list[RegionInstance]] = {doc_id: [] for doc_id in gt_by_id}
    for rec in pred_records:
        if rec.document_id not in gt_by_id:
            raise ValueError(
                f"prediction document {rec.document_id!r} is absent from the ground truth"
            )
        _require_scores(rec.regions)
        pred_regions[rec.document_id].extend(rec.regions)

    thresholds = tuple(
        sorted(set(config.iou_thresholds) | {HD_MATCH_THRESHOLD, Fraction(3, 4)})
    )
    doc_ids = sorted(gt_by_id)
    payloads = [
        (gt_by_id[doc_id], pred_regions[doc_id], thresholds, config.spacing)
        for doc_id in doc_ids
    ]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            evaluations = list(pool.map(_evaluate_document_star, payloads))
    else:
        evaluations = [_evaluate_document(*p) for p in payloads]

    return _assemble_report(evaluations, config)


def _scope_ap_columns(
    evaluations: list[DocumentEvaluation], config: EvalConfig
) -> tuple[float | None, float | None, float | None, dict[str, tuple]]:
    """AP, AP50, AP75 for a scope plus the per-category values inside it."""
    n_gt = defaultdict(int)
    for ev in evaluations:
        for cat, count in ev.gt_counts.items():
            n_gt[cat] += count

    per_category: dict[str, tuple] = {}
    ap_list: list[Fraction] = []
    ap50_list: list[Fraction] = []
    ap75_list: list[Fraction] = []
    for cat in CATEGORY_ABBREVS:
        if n_gt[cat] == 0:
            continue
        per_thr: dict[Fraction, Fraction] = {}
        thresholds = sorted(set(config.iou_thresholds) | {HD_MATCH_THRESHOLD, Fraction(3, 4)})
        for threshold in thresholds:
            pool = []
            for ev in sorted(evaluations, key=lambda e: e.document_id):
                for score, rank, tp in ev.ap_samples[threshold].get(cat, []):
                    pool.append((score, (ev.document_id, rank), tp))
            per_thr[threshold] = _ap_from_pool(pool, n_gt[cat])
        cat_ap = sum(
            (per_thr[t] for t in config.iou_thresholds), Fraction(0)
        ) / len(config.iou_thresholds)
        cat_ap50 = per_thr[HD_MATCH_THRESHOLD]
        cat_ap75 = per_thr[Fraction(3, 4)]
        per_category[cat] = (cat_ap, cat_ap50, cat_ap75)
        ap_list.append(cat_ap)
        ap50_list.append(cat_ap50)
        ap75_list.append(cat_ap75)
    return (
        _mean_fraction(ap_list),
        _mean_fraction(ap50_list),
        _mean_fraction(ap75_list),
        per_category,
    )


def _doc_level_means(evaluations: list[DocumentEvaluation]) -> dict[str, float | None]:
    """Mean over matched pairs per document, then mean over documents."""
    per_doc = {"hd": [], "hd95": [], "avg_hd": [], "iou": []}
    for ev in sorted(evaluations, key=lambda e: e.document_id):
        if not ev.pairs:
            continue
        per_doc["hd"].append(_mean([p.hd for p in ev.pairs]))
        per_doc["hd95"].append(_mean([p.hd95 for p in ev.pairs]))
        per_doc["avg_hd"].append(_mean([p.avg_hd for p in ev.pairs]))
        per_doc["iou"].append(_mean([p.iou for p in ev.pairs]))
    return {k: _mean(v) for k, v in per_doc.items()}


def _counts(evaluations: list[DocumentEvaluation]) -> tuple[int, int, int]:
    gt = sum(sum(ev.gt_counts.values()) for ev in evaluations)
    pred = sum(sum(ev.pred_counts.values()) for ev in evaluations)
    matched = sum(len(ev.pairs) for ev in evaluations)
    return gt, pred, matched


def _assemble_report(
    evaluations: list[DocumentEvaluation], config: EvalConfig
) -> MetricReport:
    rows: list[ReportRow] = []

    def scope_row(scope: str, key: str, scoped: list[DocumentEvaluation]) -> ReportRow:
        gt, pred, matched = _counts(scoped)
        means = _doc_level_means(scoped)
        ap, ap50, ap75 = (None, None, None)
        if scoped and gt > 0:
            ap, ap50, ap75, _ = _scope_ap_columns(scoped, config)
        return ReportRow(
            scope=scope,
            key=key,
            documents=len(scoped),
            gt_regions=gt,
            pred_regions=pred,
            matched_pairs=matched,
            hd=means["hd"],
            hd95=means["hd95"],
            avg_hd=means["avg_hd"],
            iou=means["iou"],
            ap=ap,
            ap50=ap50,
            ap75=ap75,
        )

    rows.append(scope_row("overall", "all", evaluations))
    for collection in COLLECTIONS:
        scoped = [ev for ev in evaluations if ev.collection == collection]
        rows.append(scope_row("collection", collection, scoped))

    # category rows: metrics pooled over matched pairs with the label
    _, _, _, per_category_ap = (
        _scope_ap_columns(evaluations, config) if evaluations else (None, None, None, {})
    )
    for cat in CATEGORY_ABBREVS:
        pairs = [
            p
            for ev in sorted(evaluations, key=lambda e: e.document_id)
            for p in ev.pairs
            if p.category == cat
        ]
        gt = sum(ev.gt_counts.get(cat, 0) for ev in evaluations)
        pred = sum(ev.pred_counts.get(cat, 0) for ev in evaluations)
        docs = sum(1 for ev in evaluations if ev.gt_counts.get(cat, 0) > 0)
        ap_cols = per_category_ap.get(cat)
        rows.append(
            ReportRow(
                scope="category",
                key=cat,
                documents=docs,
                gt_regions=gt,
                pred_regions=pred,
                matched_pairs=len(pairs),
                hd=_mean([p.hd for p in pairs]),
                hd95=_mean([p.hd95 for p in pairs]),
                avg_hd=_mean([p.avg_hd for p in pairs]),
                iou=_mean([p.iou for p in pairs]),
                ap=float(ap_cols[0]) if ap_cols else None,
                ap50=float(ap_cols[1]) if ap_cols else None,
                ap75=float(ap_cols[2]) if ap_cols else None,
            )
        )

    for ev in sorted(evaluations, key=lambda e: e.document_id):
        rows.append(scope_row("document", ev.document_id, [ev]))
    return MetricReport(rows=rows)
