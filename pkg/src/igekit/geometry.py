"""Box geometry, IoU, and the two detection post-processing filters.

Coordinates are real-valued with a top-left origin; a box is its upper-left
corner plus width and height. All functions are pure and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from igekit import kernels


@dataclass(frozen=True, order=True)
class BoundingBox:
    """Axis-aligned rectangle (x, y, w, h) with w > 0 and h > 0."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        # canonical float coordinates so wire round-trips are byte-stable
        for name in ("x", "y", "w", "h"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box must have positive extent, got w={self.w} h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    def contains_point(self, px: float, py: float) -> bool:
        """Half-open membership: x in [x, x+w), y in [y, y+h)."""
        return self.x <= px < self.right and self.y <= py < self.bottom

    def clamped(self, scene_w: float, scene_h: float) -> "BoundingBox | None":
        """Intersection with the scene rectangle; None when degenerate."""
        x1 = max(0.0, self.x)
        y1 = max(0.0, self.y)
        x2 = min(float(scene_w), self.right)
        y2 = min(float(scene_h), self.bottom)
        if x2 - x1 <= 0 or y2 - y1 <= 0:
            return None
        return BoundingBox(x1, y1, x2 - x1, y2 - y1)


@dataclass(frozen=True)
class ScoredBox:
    """A box with a confidence score in [0, 1]."""

    box: BoundingBox
    score: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "score", float(self.score))
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area; 0 for disjoint boxes."""
    return kernels.iou_xywh(a.x, a.y, a.w, a.h, b.x, b.y, b.w, b.h)


def boxes_array(boxes: Iterable[BoundingBox]) -> np.ndarray:
    """(n, 4) float64 array of (x, y, w, h) rows."""
    return np.asarray([b.as_tuple() for b in boxes], dtype=np.float64).reshape(-1, 4)


def filter_oversized(boxes: Sequence[ScoredBox], scene_w: float, scene_h: float,
                     max_area_fraction: float = 0.9) -> list[ScoredBox]:
    """Drop boxes whose area strictly exceeds the scene-area fraction.

    Boxes at exactly the limit survive; survivor order is preserved.
    """
    if scene_w <= 0 or scene_h <= 0:
        raise ValueError("scene dimensions must be positive")
    limit = max_area_fraction * scene_w * scene_h
    return [sb for sb in boxes if sb.box.area <= limit]


def _priority_order(boxes: Sequence[ScoredBox]) -> list[int]:
    # Score descending; ties broken by (x, y, w, h) lexicographically for
    # deterministic replay.
    return sorted(range(len(boxes)),
                  key=lambda i: (-boxes[i].score, boxes[i].box.as_tuple()))


def nms_indices(boxes: Sequence[ScoredBox], iou_threshold: float = 0.7) -> list[int]:
    """Indices of survivors of greedy class-agnostic suppression.

    Boxes are visited in score-descending order; a box survives iff its IoU
    with every survivor so far is <= iou_threshold. Returned indices refer
    to the input sequence, ordered by descending score.
    """
    if not boxes:
        return []
    order = _priority_order(boxes)
    arr = boxes_array(boxes[i].box for i in order)
    kept_rows = kernels.nms_keep(arr, iou_threshold)
    return [order[int(r)] for r in kept_rows]


def nms(boxes: Sequence[ScoredBox], iou_threshold: float = 0.7) -> list[ScoredBox]:
    """Greedy class-agnostic NMS; output sorted by descending score."""
    return [boxes[i] for i in nms_indices(boxes, iou_threshold)]
