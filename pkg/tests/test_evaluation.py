import json
import random

import pytest

from igekit.dataset import Annotation, DatasetVariant, Scene
from igekit.errors import FoldMismatch, InconsistentFlags
from igekit.evaluation import (
    MatchLedger,
    MetricsReport,
    Prediction,
    SemanticMatcher,
    ap_101,
    evaluate,
    match_scene,
    pr_f1,
    semantic_match,
)
from igekit.geometry import BoundingBox
from igekit.providers.embedding import (
    EmbeddingClient,
    HashEmbeddingBackend,
    MappedEmbeddingBackend,
    cosine,
)


def hash_matcher(threshold=0.85):
    return SemanticMatcher(EmbeddingClient(HashEmbeddingBackend()), threshold)


# --- independent oracles -----------------------------------------------------

def oracle_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Re-derived IoU for the matching oracle (kept independent of geometry)."""
    x_overlap = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    y_overlap = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = x_overlap * y_overlap
    return inter / (a.w * a.h + b.w * b.h - inter) if inter else 0.0


def oracle_match(preds, gts, thr, matcher):
    """Literal restatement of the claim rule with naive scanning."""
    order = sorted(range(len(preds)),
                   key=lambda i: (-preds[i].score, preds[i].box.as_tuple()))
    taken = set()
    tp = fp = 0
    assignment = {}
    for i in order:
        candidates = []
        for j, gt in enumerate(gts):
            if j in taken or not matcher.match(preds[i].category, gt.category):
                continue
            ov = oracle_iou(preds[i].box, gt.box)
            if ov > thr:
                candidates.append((ov, -j))
        if candidates:
            ov, neg_j = max(candidates)
            j = -neg_j if False else min(-c[1] for c in candidates if c[0] == ov)
            taken.add(j)
            assignment[i] = j
            tp += 1
        else:
            fp += 1
    fn = len(gts) - len(taken)
    return tp, fp, fn, assignment


def oracle_ap_101(flags, n_gt):
    """Naive 101-point evaluator: scan every prefix for every recall sample."""
    if n_gt == 0:
        return 0.0 if flags else None
    points = []
    tp = 0
    for rank, flag in enumerate(flags, start=1):
        tp += int(flag)
        points.append((tp / n_gt, tp / rank))
    total = 0.0
    for i in range(101):
        r = i / 100
        best = 0.0
        for recall, precision in points:
            if recall >= r and precision > best:
                best = precision
        total += best
    return total / 101


# --- semantic matching --------------------------------------------------------

class TestSemanticMatcher:
    def test_identical_labels_match(self):
        assert semantic_match("small fish", "small fish", hash_matcher())

    def test_unrelated_labels_do_not_match(self):
        assert not semantic_match("small fish", "wooden ladder", hash_matcher())

    def test_exact_threshold_is_not_a_match(self):
        table = {"a": (1.0, 0.0), "b": (0.6, 0.8)}
        client = EmbeddingClient(MappedEmbeddingBackend(table))
        exact = cosine(client.embed("a"), client.embed("b"))
        matcher = SemanticMatcher(client, threshold=exact)
        assert not matcher.match("a", "b")
        assert SemanticMatcher(client, threshold=exact * 0.999).match("a", "b")

    def test_symmetric_and_cached(self):
        matcher = hash_matcher()
        assert matcher.match("tree", "oak tree") == matcher.match("oak tree", "tree")
        assert len(matcher._cache) == 1


# --- matching -------------------------------------------------------------------

def pred(x, y, w, h, score, category="thing", scene="s1"):
    return Prediction(scene_id=scene, box=BoundingBox(x, y, w, h),
                      category=category, score=score)


def gt(x, y, w, h, category="thing", scene="s1", ann="a", interactable=True):
    return Annotation(ann_id=ann, scene_id=scene, box=BoundingBox(x, y, w, h),
                      category=category, interactable=interactable)


class TestMatchScene:
    def test_no_preds_two_gts(self):
        ledger = match_scene([], [gt(0, 0, 5, 5), gt(10, 10, 5, 5)], 0.75,
                             hash_matcher())
        assert (ledger.tp, ledger.fp, ledger.fn) == (0, 0, 2)

    def test_perfect_single_match(self):
        ledger = match_scene([pred(0, 0, 10, 10, 0.9)], [gt(0, 0, 10, 10)], 0.75,
                             hash_matcher())
        assert (ledger.tp, ledger.fp, ledger.fn) == (1, 0, 0)

    def test_two_preds_one_gt(self):
        preds = [pred(0, 0, 10, 10, 0.9), pred(0, 0, 10, 10, 0.8)]
        ledger = match_scene(preds, [gt(0, 0, 10, 10)], 0.75, hash_matcher())
        assert (ledger.tp, ledger.fp, ledger.fn) == (1, 1, 0)
        matched = [p for p, g in ledger.pairs if g is not None]
        assert matched[0].score == 0.9

    def test_category_gates_matching(self):
        ledger = match_scene([pred(0, 0, 10, 10, 0.9, category="lever")],
                             [gt(0, 0, 10, 10, category="fish")], 0.75,
                             hash_matcher())
        assert (ledger.tp, ledger.fp, ledger.fn) == (0, 1, 1)

    def test_iou_strictly_above_threshold(self):
        # identical boxes IoU=1.0 always pass; a pair at exactly thr must not
        ledger = match_scene([pred(0, 0, 10, 7.5, 0.9)], [gt(0, 0, 10, 10)], 0.75,
                             hash_matcher())
        assert (ledger.tp, ledger.fp, ledger.fn) == (0, 1, 1)

    def test_agrees_with_exhaustive_oracle(self):
        rng = random.Random(314)
        matcher = hash_matcher()
        categories = ["alpha", "beta"]
        for _ in range(600):
            n_p, n_g = rng.randint(0, 4), rng.randint(0, 4)
            preds = [pred(rng.randint(0, 20), rng.randint(0, 20),
                          rng.randint(2, 12), rng.randint(2, 12),
                          round(rng.random(), 3), rng.choice(categories))
                     for _ in range(n_p)]
            gts = [gt(rng.randint(0, 20), rng.randint(0, 20),
                      rng.randint(2, 12), rng.randint(2, 12),
                      rng.choice(categories), ann=f"a{k}")
                   for k in range(n_g)]
            thr = rng.choice([0.3, 0.5, 0.75])
            ledger = match_scene(preds, gts, thr, matcher)
            otp, ofp, ofn, _ = oracle_match(preds, gts, thr, matcher)
            assert (ledger.tp, ledger.fp, ledger.fn) == (otp, ofp, ofn)

    def test_tp_plus_fn_equals_gt_count(self):
        rng = random.Random(271)
        matcher = hash_matcher()
        for _ in range(100):
            preds = [pred(rng.randint(0, 15), rng.randint(0, 15), 5, 5,
                          rng.random()) for _ in range(rng.randint(0, 5))]
            gts = [gt(rng.randint(0, 15), rng.randint(0, 15), 5, 5, ann=f"g{k}")
                   for k in range(rng.randint(0, 5))]
            ledger = match_scene(preds, gts, 0.5, matcher)
            assert ledger.tp + ledger.fn == len(gts)
            assert ledger.tp + ledger.fp == len(preds)


class TestPrF1:
    def test_perfect(self):
        assert pr_f1(1, 0, 0) == {"P": 1.0, "R": 1.0, "F1": 1.0}

    def test_empty_conventions(self):
        assert pr_f1(0, 0, 2) == {"P": 0.0, "R": 0.0, "F1": 0.0}
        assert pr_f1(0, 0, 0) == {"P": 0.0, "R": 0.0, "F1": 0.0}

    def test_balanced_half(self):
        out = pr_f1(1, 1, 1)
        assert out == {"P": 0.5, "R": 0.5, "F1": 0.5}


class TestAp101:
    def test_single_tp(self):
        assert ap_101([True], 1) == pytest.approx(1.0)

    def test_hand_computed_tp_fp_tp(self):
        # interpolated precision: 1.0 for r <= 0.5 (51 samples), 2/3 above (50)
        expected = (51 * 1.0 + 50 * (2 / 3)) / 101
        assert expected == pytest.approx(0.8350, abs=5e-4)
        assert ap_101([True, False, True], 2) == pytest.approx(expected, abs=1e-12)
        assert ap_101([True, False, True], 2) == pytest.approx(0.8350, abs=1e-4)

    def test_fp_only_no_gt_is_zero(self):
        assert ap_101([False], 0) == 0.0

    def test_no_preds_no_gt_is_excluded(self):
        assert ap_101([], 0) is None

    def test_no_preds_with_gt_is_zero(self):
        assert ap_101([], 3) == 0.0

    def test_inconsistent_flags(self):
        with pytest.raises(InconsistentFlags):
            ap_101([True, True], 1)

    def test_agrees_with_bruteforce_oracle(self):
        rng = random.Random(1618)
        for _ in range(600):
            n = rng.randint(0, 6)
            flags = [rng.random() < 0.5 for _ in range(n)]
            n_gt = sum(flags) + rng.randint(0, 3)
            assert ap_101(flags, n_gt) == pytest.approx(
                oracle_ap_101(flags, n_gt), abs=1e-12)

    def test_extra_fp_at_bottom_never_increases(self):
        rng = random.Random(1001)
        for _ in range(200):
            flags = [rng.random() < 0.6 for _ in range(rng.randint(1, 6))]
            n_gt = max(1, sum(flags))
            base = ap_101(flags, n_gt)
            assert ap_101(flags + [False], n_gt) <= base + 1e-12

    def test_extra_tp_at_top_never_decreases(self):
        rng = random.Random(1002)
        for _ in range(200):
            flags = [rng.random() < 0.6 for _ in range(rng.randint(1, 6))]
            n_gt = sum(flags) + 1
            base = ap_101(flags, n_gt)
            assert ap_101([True] + flags, n_gt) >= base - 1e-12

    def test_bounded(self):
        rng = random.Random(1003)
        for _ in range(200):
            flags = [rng.random() < 0.5 for _ in range(rng.randint(0, 6))]
            n_gt = sum(flags) + rng.randint(0, 2)
            value = ap_101(flags, n_gt)
            if value is not None:
                assert 0.0 <= value <= 1.0


# --- evaluate -------------------------------------------------------------------

def make_variant(scenes, annotations, kind="semantics"):
    return DatasetVariant(kind=kind, scenes=tuple(scenes),
                          annotations=tuple(annotations))


def scene(sid):
    return Scene(scene_id=sid, app_id="app", width=960, height=540,
                 image_uri=f"{sid}.png")


class TestEvaluate:
    def test_perfect_detection_all_ones(self):
        variant = make_variant([scene("s1")], [gt(10, 10, 50, 50, "button")])
        detections = {"s1": [pred(10, 10, 50, 50, 0.95, "button")]}
        report = evaluate(variant, ["s1"], detections, hash_matcher(), "semantics")
        for entry in report.per_threshold.values():
            assert entry["average"] == {"P": 1.0, "R": 1.0, "F1": 1.0, "mAP": 1.0}

    def test_zeroing_rule_includes_ghost_category(self):
        # "fish" exists in the dataset but not in the fold; a prediction falls
        # into it, so it contributes an all-zero row to the averages.
        variant = make_variant(
            [scene("s1"), scene("s2")],
            [gt(10, 10, 50, 50, "button", scene="s1", ann="a1"),
             gt(5, 5, 20, 20, "fish", scene="s2", ann="a2")])
        detections = {"s1": [pred(10, 10, 50, 50, 0.95, "button"),
                             pred(200, 200, 30, 30, 0.5, "fish")]}
        report = evaluate(variant, ["s1"], detections, hash_matcher(), "semantics")
        entry = report.per_threshold[0.75]
        assert set(entry["per_category"]) == {"button", "fish"}
        fish = entry["per_category"]["fish"]
        assert (fish.P, fish.R, fish.F1, fish.AP) == (0.0, 0.0, 0.0, 0.0)
        assert entry["average"]["mAP"] == pytest.approx(0.5)  # strictly below 1.0

    def test_unreferenced_dataset_category_excluded(self):
        variant = make_variant(
            [scene("s1"), scene("s2")],
            [gt(10, 10, 50, 50, "button", scene="s1", ann="a1"),
             gt(5, 5, 20, 20, "fish", scene="s2", ann="a2")])
        detections = {"s1": [pred(10, 10, 50, 50, 0.95, "button")]}
        report = evaluate(variant, ["s1"], detections, hash_matcher(), "semantics")
        assert set(report.per_threshold[0.75]["per_category"]) == {"button"}

    def test_context_mode_counts(self):
        variant = make_variant(
            [scene("s1")],
            [gt(10, 10, 50, 50, "tree", ann="a1", interactable=True),
             gt(200, 200, 50, 50, "tree", ann="a2", interactable=False)],
            kind="context")
        # prediction matches only the non-interactable counterpart: FP; the
        # interactable tree stays unmatched: FN
        detections = {"s1": [pred(200, 200, 50, 50, 0.9, "tree")]}
        report = evaluate(variant, ["s1"], detections, hash_matcher(), "context")
        tree = report.per_threshold[0.75]["per_category"]["tree"]
        assert (tree.P, tree.R, tree.F1) == (0.0, 0.0, 0.0)

        # matching the interactable one instead is a TP; counterpart is a TN
        detections = {"s1": [pred(10, 10, 50, 50, 0.9, "tree")]}
        report = evaluate(variant, ["s1"], detections, hash_matcher(), "context")
        tree = report.per_threshold[0.75]["per_category"]["tree"]
        assert (tree.P, tree.R, tree.F1) == (1.0, 1.0, 1.0)

    def test_non_interactable_predictions_ignored(self):
        variant = make_variant([scene("s1")], [gt(10, 10, 50, 50, "button")])
        detections = {"s1": [Prediction("s1", BoundingBox(10, 10, 50, 50),
                                        "button", 0.95, interactable=False)]}
        report = evaluate(variant, ["s1"], detections, hash_matcher(), "semantics")
        assert report.per_threshold[0.75]["average"]["R"] == 0.0

    def test_fold_mismatch(self):
        variant = make_variant([scene("s1")], [gt(10, 10, 50, 50, "button")])
        with pytest.raises(FoldMismatch):
            evaluate(variant, ["s1"], {"sX": []}, hash_matcher(), "semantics")

    def test_recall_monotone_in_threshold(self):
        rng = random.Random(55)
        scenes = [scene(f"s{i}") for i in range(4)]
        anns, detections = [], {}
        for i in range(4):
            sid = f"s{i}"
            detections[sid] = []
            for k in range(3):
                x, y = rng.randint(0, 800), rng.randint(0, 400)
                anns.append(gt(x, y, 60, 60, "button", scene=sid, ann=f"{sid}-{k}"))
                jitter = rng.randint(0, 12)
                detections[sid].append(
                    pred(x + jitter, y, 60, 60, round(rng.random(), 2), "button",
                         scene=sid))
        variant = make_variant(scenes, anns)
        report = evaluate(variant, [s.scene_id for s in scenes], detections,
                          hash_matcher(), "semantics")
        recalls = [report.per_threshold[t]["average"]["R"]
                   for t in sorted(report.per_threshold)]
        assert all(a >= b - 1e-12 for a, b in zip(recalls, recalls[1:]))

    def test_invariant_to_input_order(self):
        variant = make_variant(
            [scene("s1"), scene("s2")],
            [gt(10, 10, 50, 50, "button", scene="s1", ann="a1"),
             gt(30, 30, 40, 40, "lever", scene="s2", ann="a2")])
        d1 = {"s1": [pred(10, 10, 50, 50, 0.9, "button"),
                     pred(500, 10, 50, 50, 0.9, "button")],
              "s2": [pred(30, 30, 40, 40, 0.7, "lever", scene="s2")]}
        d2 = {"s2": list(d1["s2"]), "s1": list(reversed(d1["s1"]))}
        r1 = evaluate(variant, ["s1", "s2"], d1, hash_matcher(), "semantics")
        r2 = evaluate(variant, ["s2", "s1"], d2, hash_matcher(), "semantics")
        assert r1.to_doc() == r2.to_doc()

    def test_interactability_mode_single_category(self):
        variant = make_variant(
            [scene("s1")],
            [gt(10, 10, 50, 50, "interactable", ann="a1"),
             gt(100, 100, 40, 40, "interactable", ann="a2")],
            kind="interactability")
        # prediction labels stay open-vocabulary; the mode collapses them
        detections = {"s1": [pred(10, 10, 50, 50, 0.9, "baseball")]}
        report = evaluate(variant, ["s1"], detections, hash_matcher(),
                          "interactability")
        entry = report.per_threshold[0.75]
        assert list(entry["per_category"]) == ["interactable"]
        assert entry["average"]["P"] == 1.0
        assert entry["average"]["R"] == 0.5

    def test_report_serialization(self):
        variant = make_variant([scene("s1")], [gt(10, 10, 50, 50, "button")])
        detections = {"s1": [pred(10, 10, 50, 50, 0.95, "button")]}
        report = evaluate(variant, ["s1"], detections, hash_matcher(), "semantics")
        doc = json.loads(report.to_json())
        assert doc["thresholds"]["0.75"]["average"]["mAP"] == 1.0
        csv_text = report.to_csv()
        assert csv_text.splitlines()[0] == "metric,IoU 0.75,IoU 0.80,IoU 0.85,IoU 0.90,IoU 0.95"
        assert "mAP,100.00" in csv_text
