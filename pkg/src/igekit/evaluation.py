"""Open-vocabulary detection metrics.

Prediction and ground-truth categories are free text, compared by embedding
cosine similarity against a strict threshold (default 0.85). Matching within
a scene is greedy in confidence order: each prediction claims the unclaimed
ground truth with the highest IoU among those in the same scene with a
semantically matching category and IoU strictly above the threshold.

Per category and IoU threshold the suite reports precision, recall, F1, and
101-point interpolated average precision; categories that received
predictions but have no ground truth in the evaluated fold contribute
all-zero rows and are *included* in the averages. Context mode re-attributes
matched pairs: matching an interactable ground truth is a true positive,
matching a non-interactable counterpart is a false positive, and unmatched
interactable / non-interactable ground truths count as FN / TN.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from igekit.dataset import INTERACTABLE_CATEGORY, Annotation, DatasetVariant
from igekit.errors import FoldMismatch, InconsistentFlags
from igekit.geometry import BoundingBox, iou
from igekit.providers.embedding import EmbeddingClient, cosine

IOU_THRESHOLDS = (0.75, 0.80, 0.85, 0.90, 0.95)
MATCH_THRESHOLD = 0.85


@dataclass(frozen=True)
class Prediction:
    scene_id: str
    box: BoundingBox
    category: str
    score: float
    interactable: bool = True


class SemanticMatcher:
    """Label equivalence by embedding cosine similarity, strictly > threshold."""

    def __init__(self, embeddings: EmbeddingClient, threshold: float = MATCH_THRESHOLD):
        self.embeddings = embeddings
        self.threshold = threshold
        self._cache: dict[frozenset[str], bool] = {}

    def match(self, a: str, b: str) -> bool:
        if not a or not b:
            raise ValueError("labels must be non-empty")
        if a == b:
            return True
        key = frozenset((a, b))
        if key not in self._cache:
            similarity = cosine(self.embeddings.embed(a), self.embeddings.embed(b))
            self._cache[key] = similarity > self.threshold
        return self._cache[key]


def semantic_match(a: str, b: str, matcher: SemanticMatcher) -> bool:
    return matcher.match(a, b)


@dataclass
class MatchLedger:
    """Greedy matching outcome for one scene and category pool."""

    pairs: list[tuple[Prediction, Annotation | None]] = field(default_factory=list)
    unmatched_gts: list[Annotation] = field(default_factory=list)

    @property
    def tp(self) -> int:
        return sum(1 for _, gt in self.pairs if gt is not None)

    @property
    def fp(self) -> int:
        return sum(1 for _, gt in self.pairs if gt is None)

    @property
    def fn(self) -> int:
        return len(self.unmatched_gts)

    def context_counts(self) -> tuple[int, int, int, int]:
        """(tp, fp, tn, fn) under the interactability re-attribution."""
        tp = sum(1 for _, gt in self.pairs if gt is not None and gt.interactable)
        fp = sum(1 for _, gt in self.pairs if gt is None or not gt.interactable)
        fn = sum(1 for gt in self.unmatched_gts if gt.interactable)
        tn = sum(1 for gt in self.unmatched_gts if not gt.interactable)
        return tp, fp, tn, fn

    def merge(self, other: "MatchLedger") -> None:
        self.pairs.extend(other.pairs)
        self.unmatched_gts.extend(other.unmatched_gts)


def _pred_order(p: Prediction) -> tuple:
    return (-p.score, p.box.as_tuple())


def match_scene(preds: Sequence[Prediction], gts: Sequence[Annotation],
                iou_thr: float, matcher: SemanticMatcher) -> MatchLedger:
    """Greedy confidence-ordered claim of highest-IoU eligible ground truths."""
    ledger = MatchLedger()
    claimed: set[int] = set()
    for pred in sorted(preds, key=_pred_order):
        best_idx, best_iou = -1, iou_thr
        for idx, gt in enumerate(gts):
            if idx in claimed:
                continue
            if not matcher.match(pred.category, gt.category):
                continue
            overlap = iou(pred.box, gt.box)
            # strictly above the threshold; among those, the highest IoU wins
            # with ties broken by ground-truth order
            if overlap > best_iou:
                best_idx, best_iou = idx, overlap
        if best_idx >= 0:
            claimed.add(best_idx)
            ledger.pairs.append((pred, gts[best_idx]))
        else:
            ledger.pairs.append((pred, None))
    ledger.unmatched_gts.extend(gt for idx, gt in enumerate(gts) if idx not in claimed)
    return ledger


def pr_f1(tp: int, fp: int, fn: int) -> dict[str, float]:
    """Precision, recall, F1 with zero conventions for empty denominators."""
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return {"P": p, "R": r, "F1": f1}


def ap_101(match_flags: Sequence[bool], n_gt: int) -> float | None:
    """101-point interpolated average precision.

    match_flags are true-positive indicators in confidence-descending rank
    order. Precision at recall r is the maximum precision at any achieved
    recall >= r (zero past the last point); AP averages the 101 samples at
    r = 0.00, 0.01, ..., 1.00. With no ground truths: 0 if any prediction
    exists (pure false positives), None (category not in play) otherwise.
    """
    flags = np.asarray(match_flags, dtype=bool)
    if n_gt < 0:
        raise ValueError("n_gt must be >= 0")
    if int(flags.sum()) > n_gt:
        raise InconsistentFlags(f"{int(flags.sum())} TPs claimed with n_gt={n_gt}")
    if n_gt == 0:
        return 0.0 if flags.size else None
    if flags.size == 0:
        return 0.0
    tp_cum = np.cumsum(flags)
    ranks = np.arange(1, flags.size + 1)
    precisions = tp_cum / ranks
    recalls = tp_cum / n_gt
    # running maximum of precision from the right = interpolated precision
    interp = np.maximum.accumulate(precisions[::-1])[::-1]
    samples = np.linspace(0.0, 1.0, 101)
    idx = np.searchsorted(recalls, samples, side="left")
    sampled = np.where(idx < flags.size, interp[np.minimum(idx, flags.size - 1)], 0.0)
    return float(sampled.mean())


@dataclass
class CategoryMetrics:
    P: float
    R: float
    F1: float
    AP: float

    def as_dict(self) -> dict[str, float]:
        return {"P": self.P, "R": self.R, "F1": self.F1, "AP": self.AP}


@dataclass
class MetricsReport:
    metadata: dict
    per_threshold: dict[float, dict]  # thr -> {"per_category": {...}, "average": {...}}

    def to_doc(self) -> dict:
        return {
            "metadata": self.metadata,
            "thresholds": {
                f"{thr:.2f}": {
                    "per_category": {c: m.as_dict()
                                     for c, m in sorted(entry["per_category"].items())},
                    "average": entry["average"],
                }
                for thr, entry in sorted(self.per_threshold.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        """Averages as percentages; rows are metrics, columns IoU thresholds."""
        thrs = sorted(self.per_threshold)
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["metric"] + [f"IoU {t:.2f}" for t in thrs])
        for metric in ("mAP", "P", "R", "F1"):
            row = [metric]
            for t in thrs:
                row.append(f"{100 * self.per_threshold[t]['average'][metric]:.2f}")
            writer.writerow(row)
        return buf.getvalue()


def _category_pool(variant: DatasetVariant, fold_preds: Sequence[Prediction],
                   gts_by_category: Mapping[str, list[Annotation]],
                   matcher: SemanticMatcher) -> list[str]:
    """Categories to report: any with fold GT, plus dataset categories that
    fold predictions fall into (the all-zero rows)."""
    pool = set(gts_by_category)
    pred_labels = {p.category for p in fold_preds}
    for category in variant.category_universe:
        if category in pool:
            continue
        if any(matcher.match(label, category) for label in pred_labels):
            pool.add(category)
    return sorted(pool)


def evaluate(variant: DatasetVariant, fold_scene_ids: Iterable[str],
             detections: Mapping[str, Sequence[Prediction]],
             matcher: SemanticMatcher, mode: str,
             iou_thresholds: Sequence[float] = IOU_THRESHOLDS) -> MetricsReport:
    """Score fold detections against the variant at every IoU threshold."""
    if mode not in ("semantics", "interactability", "context"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    fold = set(fold_scene_ids)
    for scene_id in detections:
        if scene_id not in fold:
            raise FoldMismatch(f"detections cover scene {scene_id} outside the fold")

    anns_by_scene = variant.annotations_by_scene()
    fold_anns = [a for sid in fold for a in anns_by_scene.get(sid, [])]
    preds = [p for sid in sorted(fold) for p in detections.get(sid, [])
             if p.interactable]
    if mode == "interactability":
        # binary task: every IGE prediction collapses to the single category,
        # mirroring the variant's rewritten ground truths
        preds = [replace(p, category=INTERACTABLE_CATEGORY) for p in preds]

    gts_by_category: dict[str, list[Annotation]] = {}
    for a in fold_anns:
        gts_by_category.setdefault(a.category, []).append(a)
    categories = _category_pool(variant, preds, gts_by_category, matcher)

    context_mode = mode == "context"
    per_threshold: dict[float, dict] = {}
    for thr in iou_thresholds:
        per_category: dict[str, CategoryMetrics] = {}
        for category in categories:
            cat_gts = gts_by_category.get(category, [])
            cat_preds = [p for p in preds if matcher.match(p.category, category)]
            gts_per_scene: dict[str, list[Annotation]] = {}
            for gt in cat_gts:
                gts_per_scene.setdefault(gt.scene_id, []).append(gt)
            preds_per_scene: dict[str, list[Prediction]] = {}
            for p in cat_preds:
                preds_per_scene.setdefault(p.scene_id, []).append(p)

            ledger = MatchLedger()
            for sid in sorted(set(gts_per_scene) | set(preds_per_scene)):
                ledger.merge(match_scene(preds_per_scene.get(sid, []),
                                         gts_per_scene.get(sid, []), thr, matcher))

            ranked = sorted(ledger.pairs, key=lambda pair: _pred_order(pair[0]))
            if context_mode:
                tp, fp, tn, fn = ledger.context_counts()
                flags = [gt is not None and gt.interactable for _, gt in ranked]
                n_gt = sum(1 for gt in cat_gts if gt.interactable)
            else:
                tp, fp, fn = ledger.tp, ledger.fp, ledger.fn
                flags = [gt is not None for _, gt in ranked]
                n_gt = len(cat_gts)
            rates = pr_f1(tp, fp, fn)
            ap = ap_101(flags, n_gt)
            per_category[category] = CategoryMetrics(
                P=rates["P"], R=rates["R"], F1=rates["F1"],
                AP=0.0 if ap is None else ap)

        if per_category:
            average = {
                "P": float(np.mean([m.P for m in per_category.values()])),
                "R": float(np.mean([m.R for m in per_category.values()])),
                "F1": float(np.mean([m.F1 for m in per_category.values()])),
                "mAP": float(np.mean([m.AP for m in per_category.values()])),
            }
        else:
            average = {"P": 0.0, "R": 0.0, "F1": 0.0, "mAP": 0.0}
        per_threshold[thr] = {"per_category": per_category, "average": average}

    metadata = {
        "variant": variant.kind,
        "mode": mode,
        "match_threshold": matcher.threshold,
        "scenes": len(fold),
        "categories": len(categories),
    }
    return MetricsReport(metadata=metadata, per_threshold=per_threshold)
