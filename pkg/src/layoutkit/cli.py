"""Command-line interface.

Subcommands: ``evaluate``, ``gradcheck``, ``stats``, ``defgrid-demo``,
``sample-plan``. Exit codes: 0 success, 1 internal error or failed check,
2 input validation failure. All commands are deterministic given their
inputs and seed; ``evaluate --jobs N`` produces byte-identical reports for
every N.
"""

from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import defgrid, gradcheck
from .dataset import (
    CATEGORY_ABBREVS,
    COLLECTIONS,
    SPLITS,
    ManifestError,
    load_manifest,
    repeat_factors,
    split_stats,
)
from .evaluation import EvalConfig, evaluate_manifests


def _parse_thresholds(text: str) -> tuple[Fraction, ...]:
    try:
        start_s, stop_s, step_s = text.split(":")
        start, stop, step = Fraction(start_s), Fraction(stop_s), Fraction(step_s)
    except ValueError:
        raise ValueError(
            f"invalid IoU threshold range {text!r}; expected start:stop:step"
        ) from None
    if step <= 0 or start > stop:
        raise ValueError(f"invalid IoU threshold range {text!r}")
    thresholds = []
    t = start
    while t <= stop:
        if not 0 < t <= 1:
            raise ValueError("IoU thresholds must lie in (0, 1]")
        thresholds.append(t)
        t += step
    return tuple(thresholds)


def cmd_evaluate(args: argparse.Namespace) -> int:
    if args.spacing <= 0:
        raise ValueError("--spacing must be positive")
    if args.jobs < 1:
        raise ValueError("--jobs must be at least 1")
    config = EvalConfig(
        iou_thresholds=_parse_thresholds(args.iou_thresholds),
        spacing=args.spacing,
        jobs=args.jobs,
    )
    gt_records = load_manifest(args.gt)
    pred_records = load_manifest(args.pred, require_scores=True)
    report = evaluate_manifests(gt_records, pred_records, config)
    payload = report.to_csv() if args.format == "csv" else report.to_json()
    Path(args.out).write_text(payload, encoding="utf-8", newline="\n")

    overall = report.row("overall", "all")
    print(
        f"evaluated {overall.documents} documents, {overall.gt_regions} gt regions, "
        f"{overall.pred_regions} predictions, {overall.matched_pairs} matched pairs"
    )
    print(f"report written to {args.out}")
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    if args.eps <= 0:
        raise ValueError("--eps must be positive")
    if args.instances < 1:
        raise ValueError("--instances must be at least 1")
    results = gradcheck.run_all(args.seed, args.instances, args.eps)
    ok = True
    for res in results:
        passed = res.passed(args.tol)
        ok = ok and passed
        status = "PASS" if passed else "FAIL"
        print(f"{res.name:32s} n={res.instances} max_rel_err={res.max_rel_err:.3e} {status}")
    if ok:
        print(f"gradcheck: all suites passed (tol {args.tol:.1e})")
        return 0
    print(f"gradcheck: FAILED (tol {args.tol:.1e})")
    return 1


def cmd_stats(args: argparse.Namespace) -> int:
    records = load_manifest(args.manifest)
    stats = split_stats(records)
    print("# documents")
    print("collection," + ",".join(SPLITS) + ",total")
    for coll in COLLECTIONS:
        counts = [stats.doc_counts[coll][s] for s in SPLITS]
        print(f"{coll}," + ",".join(str(c) for c in counts) + f",{stats.doc_total(coll)}")
    split_totals = [stats.split_total(s) for s in SPLITS]
    print("Total," + ",".join(str(c) for c in split_totals) + f",{stats.grand_total()}")
    print()
    print("# regions")
    print("collection," + ",".join(CATEGORY_ABBREVS))
    for coll in COLLECTIONS:
        counts = [stats.region_counts[coll][cat] for cat in CATEGORY_ABBREVS]
        print(f"{coll}," + ",".join(str(c) for c in counts))
    combined = [stats.combined_region_count(cat) for cat in CATEGORY_ABBREVS]
    print("Combined," + ",".join(str(c) for c in combined))
    return 0


def cmd_defgrid_demo(args: argparse.Namespace) -> int:
    if args.size < 2:
        raise ValueError("--size must be at least 2")
    rng = np.random.default_rng(args.seed)
    grid = defgrid.build_grid(args.size, args.size)
    dim = 16
    vertex_features = rng.normal(0.0, 1.0, (grid.n_vertices, dim))
    feature_map = rng.normal(0.0, 1.0, (2, args.size, args.size))
    if args.zero_weights:
        weights = defgrid.GcnWeights.zero_head(dim, args.seed)
    else:
        weights = defgrid.GcnWeights.random(dim, args.seed)
    raw = defgrid.residual_gcn_forward(grid, vertex_features, weights)
    deformed = defgrid.apply_offsets(grid, raw)

    center = (0.25 + 0.5 * rng.uniform(size=2)) * (args.size - 1)
    radius = (0.25 + 0.25 * rng.uniform()) * (args.size - 1)
    centroids = deformed.vertices[deformed.triangles].mean(axis=1)
    labels = ((centroids - center) ** 2).sum(axis=1) <= radius**2

    print(f"grid {deformed.height} {deformed.width}")
    print(f"vertices {deformed.n_vertices}")
    for i, (x, y) in enumerate(deformed.vertices):
        print(f"{i} {float(x)!r} {float(y)!r}")
    print(f"triangles {deformed.n_triangles}")
    for t, (a, b, c) in enumerate(deformed.triangles):
        print(f"{t} {a} {b} {c}")
    print(f"labels {deformed.n_triangles}")
    for t, lab in enumerate(labels):
        print(f"{t} {int(lab)}")
    print(
        "losses"
        f" variance={defgrid.cell_feature_variance_loss(feature_map, deformed)!r}"
        f" reconstruction={defgrid.reconstruction_loss(feature_map, deformed)!r}"
        f" area={defgrid.area_uniformity_loss(deformed)!r}"
        f" direction={defgrid.neighbor_direction_loss(deformed, raw)!r}"
    )
    polygons = defgrid.extract_region_polygons(deformed, labels)
    print(f"polygons {len(polygons)}")
    for ring in polygons:
        coords = " ".join(f"{float(x)!r} {float(y)!r}" for x, y in ring)
        print(f"polygon {len(ring)} {coords}")
    return 0


def cmd_sample_plan(args: argparse.Namespace) -> int:
    if not 0 < args.threshold <= 1:
        raise ValueError("--threshold must lie in (0, 1]")
    records = load_manifest(args.manifest)
    factors = repeat_factors(records, args.threshold)
    print("document_id,repeat_factor")
    for doc_id in sorted(factors):
        print(f"{doc_id},{factors[doc_id]:.6f}")
    epoch_ceil = sum(math.ceil(f) for f in factors.values())
    epoch_expected = sum(factors.values())
    print(
        f"# documents={len(factors)} epoch_ceil={epoch_ceil} "
        f"epoch_expected={epoch_expected:.6f}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layoutkit",
        description="Deformable layout operators and boundary-centric evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--gt", required=True, help="ground-truth manifest")
    p.add_argument("--pred", required=True, help="prediction manifest (scores required)")
    p.add_argument("--iou-thresholds", default="0.5:0.95:0.05", help="AP range start:stop:step")
    p.add_argument("--spacing", type=float, default=1.0, help="boundary resampling spacing (px)")
    p.add_argument("--jobs", type=int, default=1, help="documents evaluated in parallel")
    p.add_argument("--out", required=True, help="report output path")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=gradcheck.DEFAULT_EPS)
    p.add_argument("--tol", type=float, default=gradcheck.DEFAULT_TOLERANCE)
    p.add_argument("--instances", type=int, default=50, help="instances per suite")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("stats", help="corpus statistics tables")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("defgrid-demo", help="deform a grid and dump its geometry")
    p.add_argument("--size", type=int, default=14, help="vertex grid size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-weights", action="store_true", help="zero offset head (undeformed)")
    p.set_defaults(func=cmd_defgrid_demo)

    p = sub.add_parser("sample-plan", help="repeat-factor sampling plan for the train split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--threshold", type=float, default=0.001)
    p.set_defaults(func=cmd_sample_plan)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ManifestError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
