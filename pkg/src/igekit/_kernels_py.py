"""Pure-Python (numpy) kernels: the fallback twin of ``igekit._kernels``.

Both modules expose the same five functions with identical semantics; the
compiled twin exists only for speed. Boxes are ``(x, y, w, h)`` rows with a
top-left origin. Areas use continuous geometry (clamped interval overlap);
point membership is half-open: ``x in [bx, bx+w)``, ``y in [by, by+h)``.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "pure-python"


def iou_xywh(ax: float, ay: float, aw: float, ah: float,
             bx: float, by: float, bw: float, bh: float) -> float:
    """IoU of two boxes given as scalars."""
    ix = min(ax + aw, bx + bw) - max(ax, bx)
    iy = min(ay + ah, by + bh) - max(ay, by)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between box arrays of shape (n, 4) and (m, 4)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    ax1, ay1 = a[:, 0:1], a[:, 1:2]
    ax2, ay2 = ax1 + a[:, 2:3], ay1 + a[:, 3:4]
    bx1, by1 = b[:, 0], b[:, 1]
    bx2, by2 = bx1 + b[:, 2], by1 + b[:, 3]

    iw = np.minimum(ax2, bx2[None, :]) - np.maximum(ax1, bx1[None, :])
    ih = np.minimum(ay2, by2[None, :]) - np.maximum(ay1, by1[None, :])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] * a[:, 3])[:, None]
    area_b = (b[:, 2] * b[:, 3])[None, :]
    union = area_a + area_b - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=inter > 0.0)
    return out


def nms_keep(boxes: np.ndarray, iou_threshold: float) -> np.ndarray:
    """Greedy suppression over rows already sorted by priority.

    Row i is kept iff its IoU with every previously kept row is
    <= iou_threshold (strictly greater overlap suppresses). Returns the
    kept row indices in input order.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    n = boxes.shape[0]
    keep: list[int] = []
    for i in range(n):
        ok = True
        for j in keep:
            if iou_xywh(boxes[i, 0], boxes[i, 1], boxes[i, 2], boxes[i, 3],
                        boxes[j, 0], boxes[j, 1], boxes[j, 2], boxes[j, 3]) > iou_threshold:
                ok = False
                break
        if ok:
            keep.append(i)
    return np.asarray(keep, dtype=np.int64)


def points_in_any_box(px: np.ndarray, py: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """Per point: 1 if it falls inside any box (half-open), else 0."""
    px = np.asarray(px, dtype=np.float64).ravel()
    py = np.asarray(py, dtype=np.float64).ravel()
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    if boxes.shape[0] == 0:
        return np.zeros(px.shape[0], dtype=np.uint8)
    inside_x = (px[:, None] >= boxes[None, :, 0]) & (px[:, None] < boxes[None, :, 0] + boxes[None, :, 2])
    inside_y = (py[:, None] >= boxes[None, :, 1]) & (py[:, None] < boxes[None, :, 1] + boxes[None, :, 3])
    return np.any(inside_x & inside_y, axis=1).astype(np.uint8)


def first_hit_index(px: np.ndarray, py: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """Per box: index of the first point falling inside it, or -1."""
    px = np.asarray(px, dtype=np.float64).ravel()
    py = np.asarray(py, dtype=np.float64).ravel()
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    n = boxes.shape[0]
    if n == 0 or px.shape[0] == 0:
        return np.full(n, -1, dtype=np.int64)
    inside_x = (px[:, None] >= boxes[None, :, 0]) & (px[:, None] < boxes[None, :, 0] + boxes[None, :, 2])
    inside_y = (py[:, None] >= boxes[None, :, 1]) & (py[:, None] < boxes[None, :, 1] + boxes[None, :, 3])
    inside = inside_x & inside_y
    any_hit = inside.any(axis=0)
    first = inside.argmax(axis=0).astype(np.int64)
    first[~any_hit] = -1
    return first
