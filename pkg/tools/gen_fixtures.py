"""Regenerate the committed fixture manifests and the golden report.

Usage: python tools/gen_fixtures.py

Writes, under fixtures/:
  stats_manifest.jsonl  synthetic corpus whose document and region counts
                        reproduce the published collection statistics exactly
  eval_gt.jsonl         3-document evaluation fixture, ground truth
  eval_pred.jsonl       matching predictions with varied overlap and scores
  golden_report.csv     evaluate output for the pair above (CSV format)
  golden_report.json    evaluate output for the pair above (JSON format)

Fixture geometry is synthetic; only the counts are meaningful for the stats
fixture. Never hand-edit the outputs.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from layoutkit.dataset import (  # noqa: E402
    CATEGORY_ABBREVS,
    DocumentRecord,
    RegionInstance,
    save_manifest,
)
from layoutkit.evaluation import EvalConfig, evaluate_manifests  # noqa: E402

FIXTURES = ROOT / "fixtures"

# documents per (collection, split) and regions per (collection, category)
DOC_COUNTS = {
    "PIH": {"train": 285, "validation": 70, "test": 94},
    "Bhoomi": {"train": 408, "validation": 72, "test": 96},
    "ASR": {"train": 36, "validation": 11, "test": 14},
    "Jain": {"train": 95, "validation": 40, "test": 54},
}
REGION_COUNTS = {
    "PIH": [5105, 1079, 0, 9, 610, 52, 153, 90, 724],
    "Bhoomi": [5359, 524, 8, 737, 547, 254, 8, 2535, 80],
    "ASR": [673, 59, 0, 0, 52, 41, 0, 81, 83],
    "Jain": [1857, 313, 93, 38, 166, 7, 0, 166, 292],
}


def rect(x0: float, y0: float, x1: float, y1: float) -> list[list[float]]:
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def build_stats_manifest() -> list[DocumentRecord]:
    rng = np.random.default_rng(20240117)
    records = []
    for collection, split_counts in DOC_COUNTS.items():
        docs: list[DocumentRecord] = []
        n = 0
        for split, count in split_counts.items():
            for _ in range(count):
                n += 1
                height = 500 + 25 * (n % 5)
                width = 1600 + 50 * (n % 7)
                docs.append(
                    DocumentRecord(
                        document_id=f"{collection.lower()}_{n:04d}",
                        collection=collection,
                        split=split,
                        height=height,
                        width=width,
                    )
                )
        labels = [
            cat
            for cat, count in zip(CATEGORY_ABBREVS, REGION_COUNTS[collection])
            for _ in range(count)
        ]
        rng.shuffle(labels)
        for i, cat in enumerate(labels):
            doc = docs[i % len(docs)]
            k = len(doc.regions)
            col, row = k % 10, k // 10
            cw, ch = doc.width // 10, doc.height // 8
            x0 = col * cw + 2
            y0 = (row % 8) * ch + 2
            doc.regions.append(
                RegionInstance(
                    document_id=doc.document_id,
                    collection=collection,
                    category=cat,
                    polygon=rect(x0, y0, x0 + cw - 6, y0 + ch - 6),
                )
            )
        records.extend(docs)
    return records


def build_eval_fixture() -> tuple[list[DocumentRecord], list[DocumentRecord]]:
    def doc(doc_id: str, collection: str) -> DocumentRecord:
        return DocumentRecord(
            document_id=doc_id, collection=collection, split="test", height=40, width=60
        )

    def region(rec: DocumentRecord, cat: str, poly, score=None) -> None:
        rec.regions.append(
            RegionInstance(
                document_id=rec.document_id,
                collection=rec.collection,
                category=cat,
                polygon=poly,
                score=score,
            )
        )

    gt_a = doc("doc_alpha", "PIH")
    region(gt_a, "CLS", rect(2, 2, 20, 10))
    region(gt_a, "CLS", rect(30, 2, 50, 10))
    region(gt_a, "PB", rect(1, 20, 59, 38))
    region(gt_a, "CC", rect(22, 12, 28, 18))

    pred_a = doc("doc_alpha", "PIH")
    region(pred_a, "CLS", rect(2, 2, 20, 10), 0.95)
    region(pred_a, "CLS", rect(32, 3, 50, 11), 0.9)
    region(pred_a, "CLS", rect(40, 25, 48, 33), 0.5)  # false positive
    region(pred_a, "PB", rect(2, 21, 58, 37), 0.8)
    # CC left undetected

    gt_b = doc("doc_beta", "Bhoomi")
    region(gt_b, "CLS", rect(2, 2, 30, 8))
    region(gt_b, "PD", rect(35, 12, 55, 30))
    region(gt_b, "BL", rect(2, 32, 58, 36))

    pred_b = doc("doc_beta", "Bhoomi")
    region(pred_b, "CLS", rect(4, 3, 30, 9), 0.7)
    region(pred_b, "PD", rect(36, 12, 56, 30), 0.6)
    region(pred_b, "BL", rect(2, 32, 58, 36), 0.85)
    region(pred_b, "CLS", rect(2, 12, 30, 18), 0.65)  # false positive
    region(pred_b, "PD", rect(35, 13, 55, 31), 0.4)  # duplicate detection

    gt_c = doc("doc_gamma", "ASR")
    region(gt_c, "Hp", rect(5, 5, 12, 12))
    region(gt_c, "LM", rect(20, 5, 30, 12))
    region(gt_c, "CLS", rect(2, 20, 58, 26))
    region(gt_c, "CLS", rect(2, 28, 58, 34))

    pred_c = doc("doc_gamma", "ASR")
    region(pred_c, "Hp", rect(5, 5, 12, 12), 1.0)
    region(pred_c, "CLS", rect(2, 20, 58, 26), 0.9)
    region(pred_c, "CLS", rect(10, 28, 40, 34), 0.55)  # partial overlap
    # LM left undetected

    return [gt_a, gt_b, gt_c], [pred_a, pred_b, pred_c]


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    stats_records = build_stats_manifest()
    save_manifest(stats_records, FIXTURES / "stats_manifest.jsonl")
    print(f"stats_manifest.jsonl: {len(stats_records)} documents")

    gt_records, pred_records = build_eval_fixture()
    save_manifest(gt_records, FIXTURES / "eval_gt.jsonl")
    save_manifest(pred_records, FIXTURES / "eval_pred.jsonl")
    print(f"eval fixture: {len(gt_records)} documents")

    report = evaluate_manifests(gt_records, pred_records, EvalConfig())
    (FIXTURES / "golden_report.csv").write_text(report.to_csv(), encoding="utf-8", newline="\n")
    (FIXTURES / "golden_report.json").write_text(report.to_json(), encoding="utf-8", newline="\n")
    print("golden_report.csv / golden_report.json written")


if __name__ == "__main__":
    main()
