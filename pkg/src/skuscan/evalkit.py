"""Detection/recognition evaluation and the incremental-catalog benchmark.

The mAP@50 kit follows the common object-detection convention: predictions
are matched greedily in confidence order to same-image, same-label ground
truths at IoU >= 0.5, each ground truth matches at most once, and per-class
average precision is the area under the precision envelope over all points
(no fixed-point interpolation). Classes with no ground truth and no
predictions are excluded from the mean; ghost predictions for an absent class
score 0.

The incremental benchmark registers a base catalog of synthetic classes, then
adds fixed-size batches, measuring after every stage: top-1 accuracy on
held-out samples of registered classes, unknown-decision recall on classes
never registered, and the wall-clock cost of the batch registration itself.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SkuscanError
from .geometry import iou
from .labelio import AnnotationError, NormalizedBox, PixelBox, parse_annotation, to_pixels
from .registry import ClassifyParams, Match, SkuRegistry, Unknown
from .vindex import HnswParams, VectorIndex

DEFAULT_IOU_THRESHOLD = 0.5


class EvalError(SkuscanError):
    """Base for evaluation failures."""


class NoClasses(EvalError):
    """The mean of zero included classes is undefined."""


@dataclass(frozen=True)
class GroundTruthItem:
    image_id: str
    label: str
    box: PixelBox


@dataclass(frozen=True)
class PredictionItem:
    image_id: str
    label: str
    box: PixelBox
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass
class APResult:
    """Per-class AP with its raw precision/recall points."""

    label: str
    ap: float
    precisions: list[float]
    recalls: list[float]
    tp: int
    fp: int
    n_gt: int

    @property
    def included(self) -> bool:
        """Whether this class participates in the mAP mean."""
        return self.n_gt > 0 or (self.tp + self.fp) > 0


def greedy_match(
    preds: list[PredictionItem],
    gts: list[GroundTruthItem],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> list[tuple[PredictionItem, bool]]:
    """Label each prediction TP/FP in confidence order (ties keep input order).

    A prediction is a TP when it overlaps an unmatched ground truth of the
    same image and label with the highest IoU among them, at or above the
    threshold. Each ground truth matches at most once.
    """
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    gt_by_key: dict[tuple[str, str], list[int]] = {}
    for gi, gt in enumerate(gts):
        gt_by_key.setdefault((gt.image_id, gt.label), []).append(gi)
    matched = [False] * len(gts)

    results = []
    for pi in order:
        pred = preds[pi]
        best_iou = 0.0
        best_gi = -1
        for gi in gt_by_key.get((pred.image_id, pred.label), ()):
            if matched[gi]:
                continue
            overlap = iou(pred.box, gts[gi].box)
            if overlap > best_iou:
                best_iou = overlap
                best_gi = gi
        if best_gi >= 0 and best_iou >= iou_threshold:
            matched[best_gi] = True
            results.append((pred, True))
        else:
            results.append((pred, False))
    return results


def average_precision(tp_flags: list[bool], n_gt: int, label: str = "") -> APResult:
    """AP over a confidence-ordered TP/FP sequence by precision-envelope area."""
    if n_gt < 0:
        raise ValueError(f"n_gt must be >= 0, got {n_gt}")
    tp_cum = 0
    precisions: list[float] = []
    recalls: list[float] = []
    for i, is_tp in enumerate(tp_flags, start=1):
        tp_cum += int(is_tp)
        precisions.append(tp_cum / i)
        recalls.append(tp_cum / n_gt if n_gt else 0.0)

    ap = 0.0
    if n_gt > 0 and tp_cum > 0:
        # Walk recall steps against the running max precision from the right.
        envelope = precisions.copy()
        for i in range(len(envelope) - 2, -1, -1):
            envelope[i] = max(envelope[i], envelope[i + 1])
        prev_recall = 0.0
        for recall, prec in zip(recalls, envelope):
            if recall > prev_recall:
                ap += (recall - prev_recall) * prec
                prev_recall = recall
    return APResult(
        label=label,
        ap=ap,
        precisions=precisions,
        recalls=recalls,
        tp=tp_cum,
        fp=len(tp_flags) - tp_cum,
        n_gt=n_gt,
    )


def evaluate_classes(
    preds: list[PredictionItem],
    gts: list[GroundTruthItem],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> dict[str, APResult]:
    """Per-label APResult over a mixed prediction/ground-truth set."""
    labels = sorted({p.label for p in preds} | {g.label for g in gts})
    out: dict[str, APResult] = {}
    for label in labels:
        class_preds = [p for p in preds if p.label == label]
        class_gts = [g for g in gts if g.label == label]
        flags = [flag for _, flag in greedy_match(class_preds, class_gts, iou_threshold)]
        out[label] = average_precision(flags, len(class_gts), label=label)
    return out


def map50(results) -> float:
    """Mean AP over included classes; raises NoClasses when none qualify."""
    if isinstance(results, dict):
        results = list(results.values())
    included = [r for r in results if r.included]
    if not included:
        raise NoClasses("no class has ground truth or predictions")
    return sum(r.ap for r in included) / len(included)


def load_ground_truth_dir(path) -> list[GroundTruthItem]:
    """Read every *.txt annotation file in a directory; stems are image ids.

    Boxes stay in normalized coordinates — IoU is invariant under per-axis
    scaling, so pixel sizes are unnecessary.
    """
    items = []
    for txt in sorted(Path(path).glob("*.txt")):
        annotation = parse_annotation(txt.read_text(), image_id=txt.stem)
        for box in annotation.boxes:
            items.append(GroundTruthItem(txt.stem, str(box.class_id), to_pixels(box, 1.0, 1.0)))
    return items


def load_predictions_dir(path) -> list[PredictionItem]:
    """Read prediction files: annotation lines with a trailing confidence."""
    items = []
    for txt in sorted(Path(path).glob("*.txt")):
        for lineno, line in enumerate(txt.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise EvalError(
                    f"{txt.name}:{lineno}: expected 6 fields "
                    f"(class x_c y_c w h confidence), got {len(parts)}"
                )
            try:
                box = NormalizedBox(
                    class_id=int(parts[0]),
                    x_c=float(parts[1]),
                    y_c=float(parts[2]),
                    w=float(parts[3]),
                    h=float(parts[4]),
                )
                item = PredictionItem(
                    txt.stem, str(box.class_id), to_pixels(box, 1.0, 1.0), float(parts[5])
                )
            except (ValueError, AnnotationError) as exc:
                raise EvalError(f"{txt.name}:{lineno}: {exc}") from exc
            items.append(item)
    return items


# ----------------------------------------------------------------- benchmark


@dataclass(frozen=True)
class BenchmarkConfig:
    """Incremental-catalog experiment: base catalog plus fixed-size batches."""

    base_class_count: int = 100
    batch_size: int = 10
    batch_count: int = 4
    refs_per_sku: int = 3
    eval_per_class: int = 5
    unknown_class_count: int = 50
    noise_scale: float = 0.1
    tau: float = 0.75
    k: int = 5
    dim: int = 384
    seed: int = 0

    def __post_init__(self):
        for name in (
            "base_class_count",
            "batch_size",
            "batch_count",
            "refs_per_sku",
            "eval_per_class",
            "unknown_class_count",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class BenchmarkRow:
    categories: int
    top1_accuracy: float
    unknown_recall: float
    update_duration_ms: float
    index_size: int


@dataclass
class BenchmarkReport:
    config: BenchmarkConfig
    rows: list[BenchmarkRow] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": {
                    "base_class_count": self.config.base_class_count,
                    "batch_size": self.config.batch_size,
                    "batch_count": self.config.batch_count,
                    "refs_per_sku": self.config.refs_per_sku,
                    "eval_per_class": self.config.eval_per_class,
                    "unknown_class_count": self.config.unknown_class_count,
                    "noise_scale": self.config.noise_scale,
                    "tau": self.config.tau,
                    "k": self.config.k,
                    "dim": self.config.dim,
                    "seed": self.config.seed,
                },
                "rows": [
                    {
                        "categories": r.categories,
                        "top1_accuracy": r.top1_accuracy,
                        "unknown_recall": r.unknown_recall,
                        "update_duration_ms": r.update_duration_ms,
                        "index_size": r.index_size,
                    }
                    for r in self.rows
                ],
            },
            indent=2,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(
            ["categories", "top1_accuracy", "unknown_recall", "update_duration_ms", "index_size"]
        )
        for r in self.rows:
            writer.writerow(
                [r.categories, r.top1_accuracy, r.unknown_recall, r.update_duration_ms, r.index_size]
            )
        return buf.getvalue()


def _register_batch(registry: SkuRegistry, provider, class_ids, refs_per_sku: int) -> float:
    """Register one batch of synthetic classes; returns elapsed milliseconds."""
    t0 = time.perf_counter()
    for class_id in class_ids:
        refs = [provider.sample(class_id, draw) for draw in range(refs_per_sku)]
        registry.register_sku(
            sku_id=f"sku-{class_id:05d}",
            name=f"synthetic product {class_id}",
            price_cents=100 + class_id,
            category="synthetic",
            references=refs,
        )
    return (time.perf_counter() - t0) * 1000.0


def _measure_stage(
    registry: SkuRegistry,
    provider,
    registered: list[int],
    unknown_ids: list[int],
    config: BenchmarkConfig,
) -> tuple[float, float]:
    """(top-1 accuracy on registered classes, unknown recall on fresh classes).

    Held-out draws start at 1000 so they never collide with reference draws.
    """
    params = ClassifyParams(tau=config.tau, k=config.k)
    correct = total = 0
    for class_id in registered:
        for draw in range(1000, 1000 + config.eval_per_class):
            decision = registry.classify(provider.sample(class_id, draw), params)
            total += 1
            if isinstance(decision, Match) and decision.sku_id == f"sku-{class_id:05d}":
                correct += 1
    unknown_hits = unknown_total = 0
    for class_id in unknown_ids:
        for draw in range(1000, 1000 + config.eval_per_class):
            decision = registry.classify(provider.sample(class_id, draw), params)
            unknown_total += 1
            if isinstance(decision, Unknown):
                unknown_hits += 1
    return correct / total, unknown_hits / unknown_total


def incremental_benchmark(config: BenchmarkConfig, provider=None) -> BenchmarkReport:
    """Run the growth schedule and measure accuracy, rejection, and update cost.

    The provider must expose sample(class_id, draw); the default is the
    label-oracle embedder at the configured noise scale and seed.
    """
    if provider is None:
        from .embedspace import LabelOracleEmbedder

        provider = LabelOracleEmbedder(
            seed=config.seed, dim=config.dim, noise_scale=config.noise_scale
        )
    index = VectorIndex(dim=config.dim, params=HnswParams(rng_seed=config.seed))
    registry = SkuRegistry(index)
    report = BenchmarkReport(config=config)

    # Unknown probes live far above every id the schedule will ever register.
    unknown_ids = [1_000_000 + i for i in range(config.unknown_class_count)]
    registered = list(range(config.base_class_count))
    base_ms = _register_batch(registry, provider, registered, config.refs_per_sku)
    top1, unknown_recall = _measure_stage(registry, provider, registered, unknown_ids, config)
    report.rows.append(
        BenchmarkRow(
            categories=len(registered),
            top1_accuracy=top1,
            unknown_recall=unknown_recall,
            update_duration_ms=base_ms,
            index_size=len(index),
        )
    )

    next_id = config.base_class_count
    for _ in range(config.batch_count):
        batch = list(range(next_id, next_id + config.batch_size))
        next_id += config.batch_size
        batch_ms = _register_batch(registry, provider, batch, config.refs_per_sku)
        registered.extend(batch)
        top1, unknown_recall = _measure_stage(registry, provider, registered, unknown_ids, config)
        report.rows.append(
            BenchmarkRow(
                categories=len(registered),
                top1_accuracy=top1,
                unknown_recall=unknown_recall,
                update_duration_ms=batch_ms,
                index_size=len(index),
            )
        )
    return report


# ----------------------------------------------------------------- tau sweep


@dataclass
class TauSweepRow:
    tau: float
    correct_match: int
    wrong_match: int
    false_unknown: int
    correct_unknown: int


def tau_sweep(
    registry: SkuRegistry,
    labeled: list[tuple[np.ndarray, str | None]],
    taus: list[float],
    k: int = 5,
) -> list[TauSweepRow]:
    """Confusion counts per threshold over (embedding, expected sku or None).

    One retrieval per sample serves every threshold, so raising tau can only
    move samples from the match buckets to the unknown buckets.
    """
    if not taus:
        raise EvalError("tau grid must be non-empty")
    best: list[tuple[str, float] | None] = [
        registry.best_candidate(embedding, k) for embedding, _ in labeled
    ]
    rows = []
    for tau in taus:
        row = TauSweepRow(tau=tau, correct_match=0, wrong_match=0, false_unknown=0,
                          correct_unknown=0)
        for (_, expected), candidate in zip(labeled, best):
            is_match = candidate is not None and candidate[1] >= tau
            if expected is None:
                if is_match:
                    row.wrong_match += 1
                else:
                    row.correct_unknown += 1
            else:
                if is_match and candidate[0] == expected:
                    row.correct_match += 1
                elif is_match:
                    row.wrong_match += 1
                else:
                    row.false_unknown += 1
        rows.append(row)
    return rows
