import numpy as np
import pytest

from snowprop.synth import SceneParams, generate_dataset, make_scene, scene_rng, write_yolo_labels


SMALL = SceneParams(width=160, height=120, vehicles=5, min_size=10, max_size=20, noise_sigma=4.0)


class TestMakeScene:
    def test_zero_vehicles(self):
        params = SceneParams(width=64, height=48, vehicles=0, noise_sigma=0.0)
        img, boxes = make_scene(params, scene_rng(1, 0))
        assert boxes == []
        assert img.shape == (48, 64)
        assert len(np.unique(img)) == 1

    def test_gt_bounds_painted_vehicles_exactly(self):
        params = SceneParams(width=128, height=96, vehicles=4, min_size=8, max_size=16,
                             noise_sigma=0.0, occlusion=0.0)
        img, boxes = make_scene(params, scene_rng(2, 0))
        bg = np.bincount(img.ravel()).argmax()
        for b in boxes:
            x, y, w, h = int(b.x), int(b.y), int(b.w), int(b.h)
            inside = img[y : y + h, x : x + w]
            assert (inside != bg).all()
            # one-pixel frame around the box is pure background
            frame = img[max(0, y - 1) : y + h + 1, max(0, x - 1) : x + w + 1]
            assert np.count_nonzero(frame != bg) == inside.size

    def test_no_overlaps(self):
        img, boxes = make_scene(SMALL, scene_rng(3, 0))
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                a, b = boxes[i], boxes[j]
                assert a.x >= b.x2 or b.x >= a.x2 or a.y >= b.y2 or b.y >= a.y2

    def test_occlusion_overwrites_top(self):
        params = SceneParams(width=96, height=96, vehicles=1, min_size=20, max_size=20,
                             noise_sigma=0.0, occlusion=0.3)
        img, boxes = make_scene(params, scene_rng(4, 0))
        b = boxes[0]
        bg = np.bincount(img.ravel()).argmax()
        hidden = int(round(b.h * 0.3))
        top = img[int(b.y) : int(b.y) + hidden, int(b.x) : int(b.x2)]
        rest = img[int(b.y) + hidden : int(b.y2), int(b.x) : int(b.x2)]
        assert (top == bg).all()
        assert (rest != bg).all()

    def test_seeded_determinism(self):
        a_img, a_boxes = make_scene(SMALL, scene_rng(7, 3))
        b_img, b_boxes = make_scene(SMALL, scene_rng(7, 3))
        assert (a_img == b_img).all()
        assert a_boxes == b_boxes
        c_img, _ = make_scene(SMALL, scene_rng(8, 3))
        assert not (a_img == c_img).all()

    def test_too_crowded_raises(self):
        params = SceneParams(width=32, height=32, vehicles=40, min_size=10, max_size=12)
        with pytest.raises(RuntimeError, match="crowded"):
            make_scene(params, scene_rng(0, 0))

    def test_validation(self):
        with pytest.raises(ValueError):
            SceneParams(occlusion=1.5).validate()
        with pytest.raises(ValueError):
            SceneParams(min_size=9, max_size=4).validate()


class TestDataset:
    def test_layout_and_determinism(self, tmp_path):
        params = SceneParams(width=96, height=64, vehicles=3, min_size=8, max_size=14, noise_sigma=2.0)
        a = tmp_path / "a"
        b = tmp_path / "b"
        stems = generate_dataset(a, 2, params, seed=5)
        generate_dataset(b, 2, params, seed=5)
        assert stems == ["scene_0000", "scene_0001"]
        for stem in stems:
            ia = (a / "images" / f"{stem}.pgm").read_bytes()
            ib = (b / "images" / f"{stem}.pgm").read_bytes()
            assert ia == ib
            la = (a / "labels" / f"{stem}.txt").read_text()
            lb = (b / "labels" / f"{stem}.txt").read_text()
            assert la == lb
            assert len(la.splitlines()) == 3

    def test_yolo_labels_round_trip(self, tmp_path):
        from snowprop.boxes import Box
        from snowprop.evaluate import load_annotations

        boxes = [Box(10, 20, 30, 16), Box(50, 5, 12, 24)]
        path = tmp_path / "labels.txt"
        write_yolo_labels(boxes, (96, 64), path)
        gt = load_annotations(path, "yolo-txt", dims=(96, 64))[0]
        for want, got in zip(boxes, gt.boxes):
            assert got.x == pytest.approx(want.x, abs=0.01)
            assert got.y == pytest.approx(want.y, abs=0.01)
            assert got.w == pytest.approx(want.w, abs=0.01)
            assert got.h == pytest.approx(want.h, abs=0.01)
