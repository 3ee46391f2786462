"""Kernel backend selection.

Prefers the compiled extension when it was built, falls back to the numpy
implementation otherwise. ``IGEKIT_KERNELS=pure`` forces the fallback
(used by the parity tests and the benchmark).
"""

from __future__ import annotations

import os

from igekit import _kernels_py

if os.environ.get("IGEKIT_KERNELS", "").lower() in ("pure", "python"):
    _impl = _kernels_py
else:
    try:
        from igekit import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND_NAME

iou_xywh = _impl.iou_xywh
iou_matrix = _impl.iou_matrix
nms_keep = _impl.nms_keep
points_in_any_box = _impl.points_in_any_box
first_hit_index = _impl.first_hit_index


def backends() -> dict[str, object]:
    """All importable kernel modules, keyed by backend name."""
    out: dict[str, object] = {_kernels_py.BACKEND_NAME: _kernels_py}
    try:
        from igekit import _kernels
        out[_kernels.BACKEND_NAME] = _kernels
    except ImportError:
        pass
    return out
