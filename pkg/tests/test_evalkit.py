"""Detection metrics and the incremental-catalog benchmark harness."""

from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skuscan.embedspace import LabelOracleEmbedder
from skuscan.evalkit import (
    BenchmarkConfig,
    EvalError,
    GroundTruthItem,
    NoClasses,
    PredictionItem,
    average_precision,
    evaluate_classes,
    greedy_match,
    incremental_benchmark,
    load_ground_truth_dir,
    load_predictions_dir,
    map50,
    tau_sweep,
)
from skuscan.labelio import PixelBox
from skuscan.registry import Match, SkuRegistry
from skuscan.vindex import VectorIndex

UNIT = PixelBox(0, 0, 10, 10)


def gt(image="img", label="0", box=UNIT):
    return GroundTruthItem(image, label, box)


def pred(conf, image="img", label="0", box=UNIT):
    return PredictionItem(image, label, box, conf)


def shifted(dx):
    return PixelBox(UNIT.x_min + dx, UNIT.y_min, UNIT.x_max + dx, UNIT.y_max)


# ----------------------------------------------------------- greedy matching


def test_higher_confidence_claims_the_shared_ground_truth():
    preds = [pred(0.6), pred(0.9)]
    flags = dict()
    for p, is_tp in greedy_match(preds, [gt()]):
        flags[p.confidence] = is_tp
    assert flags == {0.9: True, 0.6: False}


def test_prediction_matches_highest_iou_ground_truth():
    near = gt(box=shifted(1))    # IoU 9/11
    far = gt(box=shifted(4))     # IoU 6/14
    matches = greedy_match([pred(0.9, box=UNIT)], [far, near])
    assert matches[0][1] is True
    second = greedy_match([pred(0.9, box=UNIT), pred(0.8, box=UNIT)], [far, near])
    # The leftover ground truth still clears IoU 0.5? 6/14 < 0.5, so FP.
    assert [flag for _, flag in second] == [True, False]


def test_iou_threshold_is_inclusive():
    # dx=10/3 gives IoU exactly 0.5 up to float error; use a box pair with
    # rational IoU 0.5: 10x10 vs 10x10 shifted so inter=50, union=150... use
    # half-overlap in y over double width instead.
    a = PixelBox(0, 0, 10, 10)
    b = PixelBox(0, 5, 10, 15)  # inter 50, union 150 -> 1/3 < 0.5
    assert greedy_match([pred(0.9, box=a)], [gt(box=b)], iou_threshold=1 / 3)[0][1]
    assert not greedy_match([pred(0.9, box=a)], [gt(box=b)], iou_threshold=0.34)[0][1]


def test_matching_respects_image_and_label_boundaries():
    preds = [pred(0.9, image="a"), pred(0.8, label="1")]
    gts = [gt(image="b"), gt(label="2")]
    assert all(flag is False for _, flag in greedy_match(preds, gts))


def test_each_ground_truth_matches_at_most_once():
    preds = [pred(c) for c in (0.9, 0.8, 0.7)]
    flags = [flag for _, flag in greedy_match(preds, [gt()])]
    assert flags == [True, False, False]


def test_confidence_ties_keep_input_order():
    preds = [pred(0.5, box=shifted(1)), pred(0.5, box=UNIT)]
    matches = greedy_match(preds, [gt()])
    assert [p.box for p, _ in matches] == [shifted(1), UNIT]


@given(
    st.lists(st.tuples(st.floats(0, 1), st.integers(0, 3)), max_size=12),
    st.integers(0, 3),
)
def test_tp_count_never_exceeds_ground_truth(entries, n_gt):
    preds = [pred(round(c, 3), box=shifted(dx)) for c, dx in entries]
    gts = [gt() for _ in range(n_gt)]
    tp = sum(flag for _, flag in greedy_match(preds, gts))
    assert tp <= min(len(preds), n_gt)


# -------------------------------------------------------------- AP hand math


def test_ap_hand_case_tp_fp_half():
    result = average_precision([True, False], n_gt=2, label="x")
    assert result.ap == pytest.approx(0.5, abs=1e-12)
    assert result.precisions == [1.0, 0.5]
    assert result.recalls == [0.5, 0.5]
    assert (result.tp, result.fp, result.n_gt) == (1, 1, 2)


def test_ap_perfect_sequence_is_one():
    assert average_precision([True, True], n_gt=2).ap == pytest.approx(1.0, abs=1e-12)


def test_ap_envelope_lifts_later_precision():
    # [FP, TP]: raw precisions [0, 0.5]; the envelope credits recall 1 at 0.5.
    assert average_precision([False, True], n_gt=1).ap == pytest.approx(0.5, abs=1e-12)


def test_ap_mixed_three_detections():
    # [TP, FP, TP] over 2 gt: 0.5*1 + 0.5*(2/3).
    result = average_precision([True, False, True], n_gt=2)
    assert result.ap == pytest.approx(5 / 6, abs=1e-12)


def test_ap_leading_false_positive_flattens_envelope():
    assert average_precision([False, True, True], n_gt=2).ap == pytest.approx(
        2 / 3, abs=1e-12
    )


def test_ap_no_true_positive_is_zero():
    result = average_precision([False, False], n_gt=3)
    assert result.ap == 0.0
    assert result.included


def test_ap_inclusion_conventions():
    # Predictions against an absent class score zero but count in the mean;
    # a class with neither ground truth nor predictions is excluded.
    phantom = average_precision([False], n_gt=0)
    assert phantom.ap == 0.0 and phantom.included
    silent = average_precision([], n_gt=0)
    assert not silent.included
    with pytest.raises(ValueError):
        average_precision([True], n_gt=-1)


@given(st.lists(st.booleans(), max_size=20), st.integers(0, 20))
def test_ap_is_bounded(flags, n_gt):
    if sum(flags) > n_gt:
        flags = flags[: n_gt]  # keep the sequence feasible
    result = average_precision(flags, n_gt)
    assert 0.0 <= result.ap <= 1.0 + 1e-12


# ------------------------------------------------------------------ full mAP


def two_class_scene():
    gts = [gt(label="0"), gt(label="0", box=shifted(20)), gt(label="1"), gt(label="1", box=shifted(20))]
    preds = [
        pred(0.9, label="0", box=UNIT),
        pred(0.8, label="0", box=shifted(40)),     # FP
        pred(0.9, label="1", box=UNIT),
        pred(0.8, label="1", box=shifted(20)),
    ]
    return preds, gts


def test_evaluate_classes_and_map_hand_case():
    preds, gts = two_class_scene()
    results = evaluate_classes(preds, gts)
    assert results["0"].ap == pytest.approx(0.5, abs=1e-12)
    assert results["1"].ap == pytest.approx(1.0, abs=1e-12)
    assert map50(results) == pytest.approx(0.75, abs=1e-12)


def test_map_excludes_silent_classes_only():
    preds, gts = two_class_scene()
    results = evaluate_classes(preds, gts)
    results["ghost"] = average_precision([], n_gt=0, label="ghost")
    assert map50(results) == pytest.approx(0.75, abs=1e-12)
    with pytest.raises(NoClasses):
        map50({"ghost": average_precision([], n_gt=0, label="ghost")})
    with pytest.raises(NoClasses):
        map50({})


def test_perfect_predictor_scores_exactly_one():
    gts = [gt(image=f"i{n}", label=str(n % 3), box=shifted(5 * n)) for n in range(9)]
    preds = [PredictionItem(g.image_id, g.label, g.box, 1.0) for g in gts]
    assert map50(evaluate_classes(preds, gts)) == 1.0


def test_confidence_rescale_keeps_map():
    preds, gts = two_class_scene()
    baseline = map50(evaluate_classes(preds, gts))
    squeezed = [
        PredictionItem(p.image_id, p.label, p.box, p.confidence / 2 + 0.1) for p in preds
    ]
    assert map50(evaluate_classes(squeezed, gts)) == pytest.approx(baseline, abs=1e-12)


def test_prediction_confidence_validated():
    with pytest.raises(ValueError):
        pred(1.5)


# -------------------------------------------------------------------- loaders


def write_dataset(root):
    gt_dir = root / "gt"
    pred_dir = root / "pred"
    gt_dir.mkdir()
    pred_dir.mkdir()
    (gt_dir / "img1.txt").write_text("0 0.25 0.25 0.5 0.5\n1 0.75 0.75 0.25 0.25\n")
    (gt_dir / "img2.txt").write_text("0 0.5 0.5 0.5 0.5\n")
    (pred_dir / "img1.txt").write_text(
        "0 0.25 0.25 0.5 0.5 0.9\n1 0.75 0.75 0.25 0.25 0.8\n"
    )
    (pred_dir / "img2.txt").write_text("0 0.5 0.5 0.5 0.5 0.95\n")
    return gt_dir, pred_dir


def test_loaders_round_trip_to_perfect_map(tmp_path):
    gt_dir, pred_dir = write_dataset(tmp_path)
    gts = load_ground_truth_dir(gt_dir)
    preds = load_predictions_dir(pred_dir)
    assert len(gts) == 3
    assert len(preds) == 3
    assert {g.image_id for g in gts} == {"img1", "img2"}
    assert map50(evaluate_classes(preds, gts)) == 1.0


def test_prediction_loader_reports_file_and_line(tmp_path):
    bad = tmp_path / "img.txt"
    bad.write_text("0 0.5 0.5 0.5 0.5 0.9\n0 0.5 0.5 0.5\n")
    with pytest.raises(EvalError, match=r"img\.txt:2"):
        load_predictions_dir(tmp_path)
    bad.write_text("0 0.5 0.5 0.5 0.5 high\n")
    with pytest.raises(EvalError, match=r"img\.txt:1"):
        load_predictions_dir(tmp_path)
    bad.write_text("0 0.5 0.5 0.5 0.5 1.5\n")
    with pytest.raises(EvalError, match=r"img\.txt:1"):
        load_predictions_dir(tmp_path)


def test_prediction_loader_skips_blank_lines(tmp_path):
    (tmp_path / "img.txt").write_text("\n0 0.5 0.5 0.5 0.5 0.9\n\n")
    assert len(load_predictions_dir(tmp_path)) == 1


# ------------------------------------------------------------ benchmark kit


SMALL = BenchmarkConfig(
    base_class_count=5,
    batch_size=2,
    batch_count=2,
    refs_per_sku=2,
    eval_per_class=2,
    unknown_class_count=3,
    dim=32,
    seed=0,
)


def test_benchmark_growth_schedule():
    report = incremental_benchmark(SMALL)
    assert [row.categories for row in report.rows] == [5, 7, 9]
    assert [row.index_size for row in report.rows] == [5, 7, 9]
    for row in report.rows:
        assert 0.0 <= row.top1_accuracy <= 1.0
        assert 0.0 <= row.unknown_recall <= 1.0
        assert row.update_duration_ms >= 0.0
    # Separable synthetic space at this scale: recognition should be clean.
    assert report.rows[-1].top1_accuracy >= 0.9
    assert report.rows[-1].unknown_recall >= 0.9


def test_benchmark_is_deterministic():
    a = incremental_benchmark(SMALL)
    b = incremental_benchmark(SMALL)
    for ra, rb in zip(a.rows, b.rows):
        # Wall-clock duration naturally varies; the measurements must not.
        assert (ra.categories, ra.top1_accuracy, ra.unknown_recall, ra.index_size) == (
            rb.categories, rb.top1_accuracy, rb.unknown_recall, rb.index_size,
        )


def test_benchmark_report_serialization():
    report = incremental_benchmark(SMALL)
    doc = json.loads(report.to_json())
    assert doc["config"]["base_class_count"] == 5
    assert len(doc["rows"]) == 3
    assert set(doc["rows"][0]) == {
        "categories", "top1_accuracy", "unknown_recall", "update_duration_ms", "index_size",
    }
    lines = report.to_csv().strip().splitlines()
    assert lines[0] == "categories,top1_accuracy,unknown_recall,update_duration_ms,index_size"
    assert len(lines) == 4


def test_benchmark_config_validation():
    with pytest.raises(ValueError):
        BenchmarkConfig(base_class_count=0)
    with pytest.raises(ValueError):
        BenchmarkConfig(batch_count=0)


def test_adding_classes_never_perturbs_existing_decisions():
    # The no-forgetting property at desk scale: answers on the base catalog
    # replay bitwise after each batch lands, scores included.
    provider = LabelOracleEmbedder(seed=3, dim=32)
    registry = SkuRegistry(VectorIndex(32))
    for cid in range(10):
        registry.register_sku(
            f"sku-{cid:05d}", f"p{cid}", 100, "x",
            [provider.sample(cid, d) for d in range(2)],
        )
    queries = [provider.sample(cid, 1000) for cid in range(10)]
    baseline = [registry.classify(q, exact=True) for q in queries]
    for batch in range(3):
        for cid in range(10 + batch * 5, 15 + batch * 5):
            registry.register_sku(
                f"sku-{cid:05d}", f"p{cid}", 100, "x",
                [provider.sample(cid, d) for d in range(2)],
            )
        current = [registry.classify(q, exact=True) for q in queries]
        for old, new in zip(baseline, current):
            assert isinstance(old, Match) and isinstance(new, Match)
            assert (new.sku_id, new.score) == (old.sku_id, old.score)


# ------------------------------------------------------------------ tau sweep


def test_tau_sweep_buckets_and_monotonicity():
    provider = LabelOracleEmbedder(seed=7, dim=32)
    registry = SkuRegistry(VectorIndex(32))
    for cid in range(4):
        registry.register_sku(
            f"sku-{cid:05d}", f"p{cid}", 100, "x",
            [provider.sample(cid, d) for d in range(3)],
        )
    labeled = [(provider.sample(cid, 500), f"sku-{cid:05d}") for cid in range(4)]
    labeled += [(provider.sample(900 + i, 500), None) for i in range(4)]

    taus = [0.1, 0.5, 0.75, 0.9, 0.999]
    rows = tau_sweep(registry, labeled, taus)
    assert [row.tau for row in rows] == taus
    for row in rows:
        total = row.correct_match + row.wrong_match + row.false_unknown + row.correct_unknown
        assert total == len(labeled)
    for lo, hi in zip(rows, rows[1:]):
        # Raising tau can only move samples out of the match buckets.
        assert hi.correct_match <= lo.correct_match
        assert hi.correct_unknown >= lo.correct_unknown
        assert hi.false_unknown >= lo.false_unknown
    assert rows[0].correct_match == 4      # generous threshold accepts all
    assert rows[-1].correct_match == 0     # near-1 threshold rejects all
    assert rows[-1].correct_unknown == 4


def test_tau_sweep_requires_grid():
    registry = SkuRegistry(VectorIndex(8))
    with pytest.raises(EvalError):
        tau_sweep(registry, [], [])
