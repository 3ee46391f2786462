# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: the hot twin of ``igekit._kernels_py``.

Same five functions, same semantics; see the pure module for the contract.
"""

import numpy as np

BACKEND_NAME = "compiled"


cdef inline double _iou(double ax, double ay, double aw, double ah,
                        double bx, double by, double bw, double bh) nogil:
    cdef double ix = min(ax + aw, bx + bw) - max(ax, bx)
    cdef double iy = min(ay + ah, by + bh) - max(ay, by)
    cdef double inter, union_
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union_ = aw * ah + bw * bh - inter
    return inter / union_


def iou_xywh(double ax, double ay, double aw, double ah,
             double bx, double by, double bw, double bh):
    """IoU of two boxes given as scalars."""
    return _iou(ax, ay, aw, ah, bx, by, bw, bh)


def iou_matrix(a, b):
    """Pairwise IoU between box arrays of shape (n, 4) and (m, 4)."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0], i, j
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    with nogil:
        for i in range(n):
            for j in range(m):
                ov[i, j] = _iou(av[i, 0], av[i, 1], av[i, 2], av[i, 3],
                                bv[j, 0], bv[j, 1], bv[j, 2], bv[j, 3])
    return out


def nms_keep(boxes, double iou_threshold):
    """Greedy suppression over rows already sorted by priority.

    Row i is kept iff its IoU with every previously kept row is
    <= iou_threshold. Returns kept row indices in input order.
    """
    cdef double[:, ::1] bv = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = bv.shape[0], i, j, nkept = 0
    keep = np.empty(n, dtype=np.int64)
    cdef long long[::1] kv = keep
    cdef bint ok
    for i in range(n):
        ok = True
        for j in range(nkept):
            if _iou(bv[i, 0], bv[i, 1], bv[i, 2], bv[i, 3],
                    bv[kv[j], 0], bv[kv[j], 1], bv[kv[j], 2], bv[kv[j], 3]) > iou_threshold:
                ok = False
                break
        if ok:
            kv[nkept] = i
            nkept += 1
    return keep[:nkept].copy()


def points_in_any_box(px, py, boxes):
    """Per point: 1 if it falls inside any box (half-open), else 0."""
    cdef double[::1] xv = np.ascontiguousarray(px, dtype=np.float64).ravel()
    cdef double[::1] yv = np.ascontiguousarray(py, dtype=np.float64).ravel()
    cdef double[:, ::1] bv = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t m = xv.shape[0], n = bv.shape[0], i, j
    out = np.zeros(m, dtype=np.uint8)
    cdef unsigned char[::1] ov = out
    with nogil:
        for i in range(m):
            for j in range(n):
                if (xv[i] >= bv[j, 0] and xv[i] < bv[j, 0] + bv[j, 2]
                        and yv[i] >= bv[j, 1] and yv[i] < bv[j, 1] + bv[j, 3]):
                    ov[i] = 1
                    break
    return out


def first_hit_index(px, py, boxes):
    """Per box: index of the first point falling inside it, or -1."""
    cdef double[::1] xv = np.ascontiguousarray(px, dtype=np.float64).ravel()
    cdef double[::1] yv = np.ascontiguousarray(py, dtype=np.float64).ravel()
    cdef double[:, ::1] bv = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t m = xv.shape[0], n = bv.shape[0], i, j
    out = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] ov = out
    with nogil:
        for j in range(n):
            for i in range(m):
                if (xv[i] >= bv[j, 0] and xv[i] < bv[j, 0] + bv[j, 2]
                        and yv[i] >= bv[j, 1] and yv[i] < bv[j, 1] + bv[j, 3]):
                    ov[j] = i
                    break
    return out
