from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermeval.coco import (
    AnnotationRecord,
    BBox,
    CategoryRecord,
    Dataset,
    DatasetError,
    Detection,
    ImageRecord,
    SizeClass,
    classify_size,
    filter_small_objects,
    parse_coco,
    parse_detections,
    write_coco,
    write_detections,
)


def _dataset(anns=(), n_images=2):
    images = tuple(
        ImageRecord(id=i + 1, file_name=f"f{i}.raw", width=640, height=480)
        for i in range(n_images)
    )
    return Dataset(
        images=images,
        annotations=tuple(anns),
        categories=(CategoryRecord(id=1, name="puddle"),),
    )


def _ann(ann_id, image_id=1, bbox=(10, 10, 20, 20), ignore=False, category_id=1):
    return AnnotationRecord(
        id=ann_id,
        image_id=image_id,
        category_id=category_id,
        bbox=BBox(*map(float, bbox)),
        ignore=ignore,
    )


# -- size classes


def test_classify_size_boundaries():
    assert classify_size(0.0) is SizeClass.SMALL
    assert classify_size(1024.0) is SizeClass.SMALL
    assert classify_size(1024.0001) is SizeClass.MEDIUM
    assert classify_size(9216.0) is SizeClass.MEDIUM
    assert classify_size(9216.0001) is SizeClass.LARGE


def test_classify_size_rejects_negative():
    with pytest.raises(DatasetError):
        classify_size(-1.0)


# -- records


def test_bbox_area_and_corners():
    b = BBox(2.0, 3.0, 10.0, 4.0)
    assert b.area == 40.0
    assert b.corners == (2.0, 3.0, 12.0, 7.0)
    assert b.as_list() == [2.0, 3.0, 10.0, 4.0]


@pytest.mark.parametrize("bad", [(0, 0, -2, 5), (0, 0, 5, -2)])
def test_bbox_rejects_negative_extent(bad):
    with pytest.raises(DatasetError):
        BBox(*map(float, bad))


def test_bbox_allows_negative_corner():
    # a box may start off-canvas; only the extent is sign-checked
    assert BBox(-3.0, -1.0, 5.0, 5.0).area == 25.0


def test_bbox_zero_extent_allowed():
    assert BBox(0.0, 0.0, 0.0, 0.0).area == 0.0


def test_image_record_rejects_bad_dims():
    with pytest.raises(DatasetError):
        ImageRecord(id=1, file_name="x", width=0, height=10)


def test_annotation_area_is_derived():
    a = _ann(1, bbox=(0, 0, 8, 8))
    assert a.area == 64.0
    assert a.size_class is SizeClass.SMALL
    assert _ann(2, bbox=(0, 0, 40, 40)).size_class is SizeClass.MEDIUM


# -- dataset wiring


def test_dataset_indexes_annotations_by_image():
    ds = _dataset([_ann(1), _ann(2, image_id=2), _ann(3)])
    assert [a.id for a in ds.annotations_for(1)] == [1, 3]
    assert [a.id for a in ds.annotations_for(2)] == [2]
    assert ds.image(2).file_name == "f1.raw"
    assert ds.image_ids() == (1, 2)


def test_dataset_rejects_duplicate_ids():
    with pytest.raises(DatasetError, match="1"):
        _dataset([_ann(1), _ann(1, image_id=2)])


def test_dataset_rejects_dangling_image_ref():
    with pytest.raises(DatasetError, match="99"):
        _dataset([_ann(1, image_id=99)])


def test_dataset_rejects_dangling_category_ref():
    with pytest.raises(DatasetError, match="7"):
        _dataset([_ann(1, category_id=7)])


def test_subset_keeps_only_named_images():
    ds = _dataset([_ann(1), _ann(2, image_id=2)])
    sub = ds.subset([2])
    assert sub.image_ids() == (2,)
    assert [a.id for a in sub.annotations] == [2]
    assert len(sub.categories) == 1


def test_subset_unknown_image_errors():
    with pytest.raises(DatasetError):
        _dataset().subset([5])


# -- small-object filter


def test_filter_marks_boxes_at_or_below_threshold():
    ds = _dataset(
        [
            _ann(1, bbox=(0, 0, 10.0, 50)),   # width exactly at the cutoff
            _ann(2, bbox=(0, 0, 10.01, 50)),  # just above
            _ann(3, bbox=(0, 0, 50, 9.0)),    # short side
        ]
    )
    out = filter_small_objects(ds)
    flags = {a.id: a.ignore for a in out.annotations}
    assert flags == {1: True, 2: False, 3: True}


def test_filter_is_idempotent_and_preserves_boxes():
    ds = _dataset([_ann(1, bbox=(0, 0, 4, 4)), _ann(2, bbox=(5, 5, 30, 30))])
    once = filter_small_objects(ds)
    twice = filter_small_objects(once)
    assert once == twice
    assert [a.bbox for a in once.annotations] == [a.bbox for a in ds.annotations]


def test_filter_never_clears_existing_ignore():
    ds = _dataset([_ann(1, bbox=(0, 0, 50, 50), ignore=True)])
    out = filter_small_objects(ds, threshold=10.0)
    assert out.annotations[0].ignore is True


@given(threshold=st.floats(min_value=0.0, max_value=100.0))
@settings(max_examples=40, deadline=None)
def test_filter_monotone_in_threshold(threshold):
    ds = _dataset(
        [_ann(i + 1, bbox=(0, 0, 5.0 * (i + 1), 7.0 * (i + 1))) for i in range(8)]
    )
    lo = {a.id for a in filter_small_objects(ds, threshold).annotations if a.ignore}
    hi = {
        a.id
        for a in filter_small_objects(ds, threshold + 13.0).annotations
        if a.ignore
    }
    assert lo <= hi


# -- parsing


def _doc(ds):
    return json.loads(write_coco(ds))


def test_coco_round_trip():
    ds = _dataset([_ann(1, bbox=(1.5, 2.5, 10.25, 4.0), ignore=True), _ann(2, image_id=2)])
    assert parse_coco(write_coco(ds)) == ds


def test_parse_requires_top_level_keys():
    with pytest.raises(DatasetError, match="categories"):
        parse_coco(json.dumps({"images": [], "annotations": []}))


def test_parse_checks_area_consistency():
    doc = _doc(_dataset([_ann(7)]))
    doc["annotations"][0]["area"] = 123.0
    with pytest.raises(DatasetError, match="7"):
        parse_coco(json.dumps(doc))


def test_parse_tolerates_half_pixel_area_slack():
    doc = _doc(_dataset([_ann(1, bbox=(0, 0, 20, 20))]))
    doc["annotations"][0]["area"] = 400.4
    ds = parse_coco(json.dumps(doc))
    assert ds.annotations[0].area == 400.0


def test_parse_merges_iscrowd_into_ignore():
    doc = _doc(_dataset([_ann(1)]))
    doc["annotations"][0]["iscrowd"] = 1
    assert parse_coco(json.dumps(doc)).annotations[0].ignore is True


def test_parse_rejects_malformed_bbox():
    doc = _doc(_dataset([_ann(1)]))
    doc["annotations"][0]["bbox"] = [1, 2, 3]
    with pytest.raises(DatasetError):
        parse_coco(json.dumps(doc))


def test_parse_rejects_non_json():
    with pytest.raises(DatasetError):
        parse_coco("{not json")


# -- detections


def test_detection_score_bounds():
    with pytest.raises(DatasetError):
        Detection(image_id=1, category_id=1, bbox=BBox(0, 0, 1, 1), score=1.5)


def test_detections_round_trip():
    dets = (
        Detection(image_id=1, category_id=1, bbox=BBox(1.0, 2.0, 3.0, 4.0), score=0.75),
        Detection(image_id=2, category_id=1, bbox=BBox(0.0, 0.0, 9.5, 2.25), score=0.5),
    )
    assert parse_detections(write_detections(dets)) == dets


def test_parse_detections_checks_references():
    ds = _dataset()
    text = write_detections(
        (Detection(image_id=9, category_id=1, bbox=BBox(0, 0, 1, 1), score=0.5),)
    )
    with pytest.raises(DatasetError, match="9"):
        parse_detections(text, ds)


@given(
    st.lists(
        st.tuples(
            st.floats(0, 100, allow_nan=False),
            st.floats(0, 100, allow_nan=False),
            st.floats(0, 50, allow_nan=False),
            st.floats(0, 50, allow_nan=False),
            st.floats(0, 1, allow_nan=False),
        ),
        max_size=8,
    )
)
@settings(max_examples=50, deadline=None)
def test_detection_round_trip_property(raw):
    dets = tuple(
        Detection(image_id=1, category_id=1, bbox=BBox(x, y, w, h), score=s)
        for x, y, w, h, s in raw
    )
    assert parse_detections(write_detections(dets)) == dets
