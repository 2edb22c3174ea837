import pytest
from hypothesis import given, strategies as st

from flowtrack.geometry import (
    CropConfig,
    clip_to_image,
    contains,
    global_crop,
    iou,
    iou_matrix,
    square_local_crop,
)
from flowtrack.model import BBox, ValidationError

coord = st.floats(-1000, 1000, allow_nan=False)
size = st.floats(0.5, 500, allow_nan=False)
boxes = st.builds(BBox, coord, coord, size, size)


def test_iou_examples():
    a = BBox(0, 0, 2, 2)
    assert iou(a, a) == 1.0
    assert iou(a, BBox(5, 5, 1, 1)) == 0.0
    assert iou(a, BBox(1, 1, 2, 2)) == pytest.approx(1 / 7, abs=1e-12)


def test_touching_edges_have_zero_iou():
    assert iou(BBox(0, 0, 2, 2), BBox(2, 0, 2, 2)) == 0.0


@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


@given(boxes)
def test_iou_self_is_one(a):
    assert iou(a, a) == 1.0


@given(st.lists(boxes, min_size=1, max_size=5), st.lists(boxes, min_size=1, max_size=5))
def test_iou_matrix_matches_scalar(a, b):
    m = iou_matrix(a, b)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            assert m[i, j] == pytest.approx(iou(x, y), abs=1e-12)


@pytest.mark.parametrize(
    "box, expected",
    [
        ((0, 0, 50, 50), (0, 0, 50, 50)),
        ((10, 20, 30, 50), (0, 20, 50, 50)),
        ((0, 0, 60, 20), (0, -20, 60, 60)),
    ],
)
def test_square_local_crop(box, expected):
    assert square_local_crop(BBox(*box)).as_list() == list(expected)


def test_global_crop_examples():
    local = BBox(0, 20, 50, 50)
    assert global_crop(local, CropConfig(mu=1)) == local
    assert global_crop(local, CropConfig(mu=3)).as_list() == [-50, -30, 150, 150]
    assert global_crop(BBox(100, 100, 10, 10), CropConfig(mu=2)).as_list() == [95, 95, 20, 20]


def test_crop_config_rejects_small_mu():
    with pytest.raises(ValidationError):
        CropConfig(mu=0.5)


def test_clip_examples():
    cfg = CropConfig(mu=3, image_w=3840, image_h=2160)
    inside = BBox(10, 10, 5, 5)
    assert clip_to_image(inside, cfg) == inside
    assert clip_to_image(BBox(-50, -30, 150, 150), cfg).as_list() == [0, 0, 100, 120]
    with pytest.raises(ValidationError):
        clip_to_image(BBox(-100, 10, 50, 50), cfg)


@given(boxes)
def test_local_crop_preserves_center(b):
    sq = square_local_crop(b)
    assert sq.w == sq.h == max(b.w, b.h)
    assert sq.center[0] == pytest.approx(b.center[0], abs=1e-9)
    assert sq.center[1] == pytest.approx(b.center[1], abs=1e-9)


@given(boxes, st.floats(1.0, 10.0))
def test_global_contains_local(b, mu):
    local = square_local_crop(b)
    assert contains(global_crop(local, CropConfig(mu=mu)), local)
    assert contains(local, b)
