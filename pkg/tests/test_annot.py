import json
import math

import numpy as np
import pytest

from rboxkit import (
    AnnotationError,
    MappingSpec,
    box_corners,
    box_dims,
    box_from_center,
    load_annotations,
    load_boxes,
    load_corner_annotations,
    load_detections,
    load_ground_truths,
    normalize_annotation,
    normalize_center_box,
    normalize_corner_quad,
    normalize_voc_box,
    rotated_iou,
    save_boxes,
    save_detections,
    save_ground_truths,
)
from rboxkit.evaluate import Detections, GroundTruths

from conftest import random_boxes


class TestNormalizeConventions:
    def test_voc_identity(self):
        assert np.array_equal(normalize_voc_box(0, 0, 4, 2), (0, 0, 4, 2, 0))

    def test_voc_rejects_inverted(self):
        with pytest.raises(Exception):
            normalize_voc_box(4, 0, 0, 2)

    def test_center_with_negative_half_turn_range(self):
        # angle -pi/2 under a [-pi, pi] convention lands at canonical pi/2
        box = normalize_annotation(
            (2, 1, 4, 2, -math.pi / 2), "center_wh_angle", angle_range=(-math.pi, math.pi)
        )
        assert box[4] == pytest.approx(math.pi / 2, abs=1e-12)
        original = box_from_center(2, 1, 4, 2, -math.pi / 2)
        assert rotated_iou(box, original) == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(box_dims(box), (4, 2), atol=1e-12)

    def test_angle_outside_declared_range_rejected(self):
        with pytest.raises(AnnotationError, match="outside"):
            normalize_annotation((0, 0, 4, 2, 2.0), "center_wh_angle", angle_range=(-1.0, 1.0))

    def test_degrees_unit(self):
        box = normalize_annotation(
            (0, 0, 4, 2, 90.0), "center_wh_angle", angle_unit="degrees", angle_range=(0, 180)
        )
        assert box[4] == pytest.approx(math.pi / 2, abs=1e-12)

    def test_corner_quad_any_cyclic_order(self):
        base = [(0, 0), (4, 0), (4, 2), (0, 2)]
        expected = normalize_corner_quad(base)
        assert np.allclose(expected, (0, 0, 4, 2, 0), atol=1e-12)
        for shift in range(4):
            rolled = base[shift:] + base[:shift]
            assert np.allclose(normalize_corner_quad(rolled), expected, atol=1e-9)
            assert np.allclose(normalize_corner_quad(rolled[::-1]), expected, atol=1e-9)

    def test_corner_quad_prefers_long_side_first(self):
        box = normalize_corner_quad([(0, 0), (2, 0), (2, 4), (0, 4)])
        ab, bc = box_dims(box)
        assert ab == pytest.approx(4.0, abs=1e-12)
        assert bc == pytest.approx(2.0, abs=1e-12)
        assert box[4] == pytest.approx(math.pi / 2, abs=1e-12)

    def test_square_takes_smaller_angle(self):
        corners = box_corners(box_from_center(0, 0, 3, 3, 2.0))
        box = normalize_corner_quad(corners)
        assert 0 <= box[4] < math.pi / 2

    def test_corner_reconstruction_within_half_pixel(self, rng):
        for box in random_boxes(rng, 100):
            corners = box_corners(box)
            normalized = normalize_corner_quad(corners)
            rebuilt = box_corners(normalized)
            got = np.array(sorted(map(tuple, np.round(rebuilt, 6))))
            want = np.array(sorted(map(tuple, np.round(corners, 6))))
            assert np.max(np.abs(got - want)) <= 0.5

    def test_non_rectangular_rejected(self):
        with pytest.raises(AnnotationError, match="rectangle"):
            normalize_corner_quad([(0, 0), (4, 0), (4.5, 2), (0, 2)])

    def test_wrong_point_count_rejected(self):
        with pytest.raises(AnnotationError, match="4 corner"):
            normalize_corner_quad([(0, 0), (4, 0), (4, 2)])

    def test_normalize_is_idempotent(self, rng):
        for box in random_boxes(rng, 50):
            once = normalize_corner_quad(box_corners(box))
            twice = normalize_corner_quad(box_corners(once))
            assert np.allclose(once, twice, atol=1e-9)

    def test_two_representations_same_rectangle(self, rng):
        for box in random_boxes(rng, 50):
            w, h = box_dims(box)
            cx, cy = (box[0] + box[2]) / 2, (box[1] + box[3]) / 2
            via_corners = normalize_corner_quad(box_corners(box))
            via_center = normalize_center_box(cx, cy, w, h, box[4])
            assert rotated_iou(via_corners, via_center) == pytest.approx(1.0, abs=1e-9)


class TestBoxListIO:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        ids, boxes = load_boxes(path)
        assert ids == [] and boxes.shape == (0, 5)

    def test_csv_round_trip(self, tmp_path, rng):
        boxes = random_boxes(rng, 1000)
        path = tmp_path / "boxes.csv"
        save_boxes(path, boxes, ids=[f"b{i}" for i in range(1000)])
        ids, loaded = load_boxes(path)
        assert ids[0] == "b0" and len(ids) == 1000
        assert np.max(np.abs(loaded - boxes)) <= 1e-6
        assert np.array_equal(loaded, boxes)  # repr formatting is lossless

    def test_json_round_trip(self, tmp_path, rng):
        boxes = random_boxes(rng, 200)
        path = tmp_path / "boxes.json"
        save_boxes(path, boxes)
        ids, loaded = load_boxes(path)
        assert np.array_equal(loaded, boxes)
        assert json.loads(path.read_text())[0]["x_a"] == boxes[0, 0]

    def test_header_validated(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,x1,y1\n")
        with pytest.raises(AnnotationError, match="header"):
            load_boxes(path)

    def test_bad_value_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,x_a,y_a,x_c,y_c,theta\nr0,0,0,4,2,0\nr1,0,oops,4,2,0\n")
        with pytest.raises(AnnotationError, match="3"):
            load_boxes(path)

    def test_detections_round_trip(self, tmp_path, rng):
        n = 50
        dets = Detections(
            boxes=random_boxes(rng, n),
            scores=rng.uniform(0, 1, n),
            class_ids=rng.integers(0, 4, n),
            image_ids=np.asarray([f"im{i % 3}" for i in range(n)], object),
        )
        path = tmp_path / "dets.csv"
        save_detections(path, dets)
        loaded = load_detections(path)
        assert np.array_equal(loaded.boxes, dets.boxes)
        assert np.array_equal(loaded.scores, dets.scores)
        assert np.array_equal(loaded.class_ids, dets.class_ids)
        assert list(loaded.image_ids) == list(dets.image_ids)

    def test_ground_truths_round_trip(self, tmp_path, rng):
        n = 30
        gts = GroundTruths(
            boxes=random_boxes(rng, n),
            class_ids=rng.integers(0, 3, n),
            image_ids=np.asarray(["im0"] * n, object),
            difficult=rng.uniform(0, 1, n) < 0.3,
        )
        path = tmp_path / "gt.csv"
        save_ground_truths(path, gts)
        loaded = load_ground_truths(path)
        assert np.array_equal(loaded.boxes, gts.boxes)
        assert np.array_equal(loaded.difficult, gts.difficult)

    def test_ground_truths_difficult_optional(self, tmp_path):
        path = tmp_path / "gt.csv"
        path.write_text("id,x_a,y_a,x_c,y_c,theta,class_id,image_id\ng0,0,0,4,2,0,1,im0\n")
        gts = load_ground_truths(path)
        assert not gts.difficult[0]


class TestCornerFileLoading:
    def make_file(self, tmp_path, lines):
        path = tmp_path / "corners.csv"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_load(self, tmp_path):
        path = self.make_file(tmp_path, ["0,0,4,0,4,2,0,2,3,im0"])
        records = load_corner_annotations(path)
        assert len(records) == 1
        assert np.allclose(records[0].box, (0, 0, 4, 2, 0), atol=1e-12)
        assert records[0].class_id == 3
        assert records[0].image_id == "im0"

    def test_malformed_line_number_strict(self, tmp_path):
        path = self.make_file(
            tmp_path,
            ["0,0,4,0,4,2,0,2,3,im0", "0,0,4,0,4,2,1,im0", "0,0,4,0,4,2,0,2,3,im0"],
        )
        with pytest.raises(AnnotationError) as exc:
            load_corner_annotations(path)
        assert exc.value.line == 2

    def test_lenient_skips_and_reports(self, tmp_path):
        path = self.make_file(
            tmp_path,
            ["0,0,4,0,4,2,0,2,3,im0", "0,0,4,0,4,2,1,im0", "1,1,5,1,5,3,1,3,2,im1"],
        )
        records, errors = load_corner_annotations(path, strict=False)
        assert len(records) == 2
        assert len(errors) == 1 and errors[0][0] == 2


class TestMappingSpec:
    def test_custom_center_layout_in_degrees(self, tmp_path):
        mapping = MappingSpec(
            convention="center_wh_angle",
            columns=("image_id", "class_id", "cx", "cy", "w", "h", "angle"),
            angle_unit="degrees",
            angle_range=(-90.0, 90.0),
        )
        path = tmp_path / "data.txt"
        path.write_text("im0,2,10,20,8,4,-90\n")
        records = load_annotations(path, mapping)
        assert len(records) == 1
        rec = records[0]
        assert rec.class_id == 2 and rec.image_id == "im0"
        assert rec.box[4] == pytest.approx(math.pi / 2, abs=1e-12)
        assert rotated_iou(rec.box, box_from_center(10, 20, 8, 4, -math.pi / 2)) == pytest.approx(
            1.0, abs=1e-9
        )

    def test_mapping_from_json_file(self, tmp_path):
        spec_path = tmp_path / "mapping.json"
        spec_path.write_text(
            json.dumps(
                {
                    "convention": "voc",
                    "columns": ["xmin", "ymin", "xmax", "ymax", "class_id", "image_id"],
                    "has_header": True,
                }
            )
        )
        data_path = tmp_path / "voc.csv"
        data_path.write_text("xmin,ymin,xmax,ymax,class_id,image_id\n0,0,4,2,1,im0\n")
        records = load_annotations(data_path, str(spec_path))
        assert np.array_equal(records[0].box, (0, 0, 4, 2, 0))

    def test_angle_out_of_declared_range_has_line_number(self, tmp_path):
        mapping = MappingSpec(
            convention="center_wh_angle",
            columns=("cx", "cy", "w", "h", "angle"),
            angle_range=(0.0, math.pi),
        )
        path = tmp_path / "data.csv"
        path.write_text("0,0,4,2,1.0\n0,0,4,2,-2.0\n")
        with pytest.raises(AnnotationError) as exc:
            load_annotations(path, mapping)
        assert exc.value.line == 2

    def test_unknown_convention_rejected(self):
        with pytest.raises(ValueError, match="convention"):
            MappingSpec(convention="quaternions", columns=("a",))
