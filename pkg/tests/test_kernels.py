import numpy as np
import pytest

from igekit import kernels


def random_boxes(rng, n, span=30.0, max_side=12.0):
    xy = rng.uniform(0, span, size=(n, 2))
    wh = rng.uniform(0.5, max_side, size=(n, 2))
    return np.hstack([xy, wh])


@pytest.fixture(scope="module")
def both():
    mods = kernels.backends()
    if len(mods) < 2:
        pytest.skip("compiled kernels not built; nothing to compare")
    return mods["pure-python"], mods["compiled"]


def test_iou_matrix_parity(both):
    pure, comp = both
    rng = np.random.default_rng(11)
    a, b = random_boxes(rng, 40), random_boxes(rng, 25)
    np.testing.assert_allclose(pure.iou_matrix(a, b), comp.iou_matrix(a, b),
                               rtol=0, atol=1e-12)


def test_iou_scalar_parity(both):
    pure, comp = both
    rng = np.random.default_rng(12)
    for row in random_boxes(rng, 60):
        other = random_boxes(rng, 1)[0]
        assert pure.iou_xywh(*row, *other) == pytest.approx(
            comp.iou_xywh(*row, *other), abs=1e-15)


def test_nms_keep_parity(both):
    pure, comp = both
    rng = np.random.default_rng(13)
    for _ in range(100):
        boxes = random_boxes(rng, int(rng.integers(0, 15)))
        for thr in (0.3, 0.5, 0.7):
            np.testing.assert_array_equal(pure.nms_keep(boxes, thr),
                                          comp.nms_keep(boxes, thr))


def test_point_kernels_parity(both):
    pure, comp = both
    rng = np.random.default_rng(14)
    for _ in range(50):
        boxes = random_boxes(rng, int(rng.integers(0, 8)))
        px = rng.uniform(0, 45, size=200)
        py = rng.uniform(0, 45, size=200)
        np.testing.assert_array_equal(pure.points_in_any_box(px, py, boxes),
                                      comp.points_in_any_box(px, py, boxes))
        np.testing.assert_array_equal(pure.first_hit_index(px, py, boxes),
                                      comp.first_hit_index(px, py, boxes))


def test_membership_is_half_open():
    boxes = np.array([[10.0, 10.0, 5.0, 5.0]])
    px = np.array([10.0, 14.999, 15.0, 9.999])
    py = np.array([10.0, 14.999, 12.0, 12.0])
    got = kernels.points_in_any_box(px, py, boxes)
    np.testing.assert_array_equal(got, [1, 1, 0, 0])


def test_first_hit_index_semantics():
    boxes = np.array([[0.0, 0.0, 2.0, 2.0], [10.0, 10.0, 2.0, 2.0], [50.0, 50.0, 1.0, 1.0]])
    px = np.array([11.0, 1.0, 1.5])
    py = np.array([11.0, 1.0, 1.5])
    np.testing.assert_array_equal(kernels.first_hit_index(px, py, boxes), [1, 0, -1])
