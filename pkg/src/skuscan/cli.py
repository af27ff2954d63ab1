"""Command-line front door: dataset augmentation, verification, evaluation,
and the API server.

Exit codes: 0 success; 1 a verification or evaluation found defects;
2 usage or domain error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .augment import AugmentConfig, generate_rotated_dataset, verify_dataset
from .errors import SkuscanError


def _parse_fill(value: str) -> tuple[int, int, int]:
    value = value.lstrip("#")
    if len(value) != 6:
        raise argparse.ArgumentTypeError(f"fill must be 6 hex digits, got {value!r}")
    try:
        return tuple(int(value[i : i + 2], 16) for i in (0, 2, 4))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"fill must be hex: {exc}") from exc


def _parse_angles(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in value.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"angles must be comma-separated ints: {exc}") from exc


def _cmd_augment(args) -> int:
    if args.angles is not None:
        angles = args.angles
    else:
        angles = tuple(range(args.step, 360, args.step))
    config = AugmentConfig(
        input_dir=args.input,
        output_dir=args.output,
        angles=angles,
        tightness=args.tightness,
        fill_color=args.fill,
        keep_originals=not args.no_originals,
    )
    report = generate_rotated_dataset(config)
    print(
        f"images {report.images_in} -> {report.images_out}, "
        f"boxes {report.boxes_in} -> {report.boxes_out} "
        f"({report.boxes_dropped} dropped), "
        f"{report.images_skipped} skipped, {report.elapsed:.1f}s"
    )
    return 0


def _cmd_verify(args) -> int:
    report = verify_dataset(args.directory)
    print(f"images {report.images}, boxes {report.boxes}")
    if report.ok:
        print("ok")
        return 0
    for defect in report.defects():
        print(f"defect: {defect}")
    return 1


def _cmd_eval_map50(args) -> int:
    from .evalkit import evaluate_classes, load_ground_truth_dir, load_predictions_dir, map50

    gts = load_ground_truth_dir(args.gt)
    preds = load_predictions_dir(args.pred)
    results = evaluate_classes(preds, gts, iou_threshold=args.iou)
    for label in sorted(results):
        r = results[label]
        marker = "" if r.included else " (excluded)"
        print(f"class {label}: AP {r.ap:.4f}  tp {r.tp} fp {r.fp} gt {r.n_gt}{marker}")
    score = map50(results)
    print(f"mAP@{args.iou:g}: {score:.4f}")
    return 0


def _cmd_eval_bench(args) -> int:
    from .evalkit import BenchmarkConfig, incremental_benchmark

    raw = json.loads(Path(args.config).read_text()) if args.config else {}
    config = BenchmarkConfig(**raw)
    report = incremental_benchmark(config)
    out = Path(args.out)
    out.write_text(report.to_json())
    csv_path = out.with_suffix(".csv")
    csv_path.write_text(report.to_csv())
    for row in report.rows:
        print(
            f"categories {row.categories}: top1 {row.top1_accuracy:.4f}, "
            f"unknown recall {row.unknown_recall:.4f}, "
            f"update {row.update_duration_ms:.1f} ms, index {row.index_size}"
        )
    print(f"wrote {out} and {csv_path}")
    return 0


def _cmd_serve(args) -> int:
    from .service import ApiConfig, serve

    config = ApiConfig.from_file(args.config) if args.config else ApiConfig()
    serve(config.with_env_overrides())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skuscan")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="generate a rotation-augmented dataset")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--output", required=True, type=Path)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--step", type=int, default=10, help="angle step in degrees")
    group.add_argument("--angles", type=_parse_angles, default=None,
                       help="explicit comma-separated angles")
    p.add_argument("--tightness", type=float, default=1.0)
    p.add_argument("--fill", type=_parse_fill, default=(255, 255, 255),
                   help="pad color as hex rrggbb")
    p.add_argument("--no-originals", action="store_true",
                   help="emit only rotated copies")
    p.set_defaults(handler=_cmd_augment)

    p = sub.add_parser("verify", help="check an image/annotation directory")
    p.add_argument("directory", type=Path)
    p.set_defaults(handler=_cmd_verify)

    p = sub.add_parser("eval", help="evaluation commands")
    eval_sub = p.add_subparsers(dest="eval_command", required=True)

    p_map = eval_sub.add_parser("map50", help="detection mAP at an IoU threshold")
    p_map.add_argument("--gt", required=True, type=Path)
    p_map.add_argument("--pred", required=True, type=Path)
    p_map.add_argument("--iou", type=float, default=0.5)
    p_map.set_defaults(handler=_cmd_eval_map50)

    p_bench = eval_sub.add_parser("bench", help="incremental-catalog benchmark")
    p_bench.add_argument("--config", type=Path, default=None)
    p_bench.add_argument("--out", required=True, type=Path)
    p_bench.set_defaults(handler=_cmd_eval_bench)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--config", type=Path, default=None)
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except SkuscanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
