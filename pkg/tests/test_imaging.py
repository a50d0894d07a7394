import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snowprop.boxes import Box, box_iou, map_box_to_base
from snowprop.imaging import (
    build_pyramid,
    load_image,
    read_pgm,
    to_grayscale,
    write_pgm,
)


class TestPgm:
    def test_decode_2x2(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
        img = read_pgm(p)
        assert img.shape == (2, 2)
        assert img.tolist() == [[0, 255], [128, 64]]

    def test_16bit_rejected(self, tmp_path):
        p = tmp_path / "deep.pgm"
        p.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
        with pytest.raises(ValueError, match="unsupported bit depth"):
            read_pgm(p)

    def test_comment_and_whitespace_header(self, tmp_path):
        p = tmp_path / "c.pgm"
        p.write_bytes(b"P5\n# a comment\n 2\t2 \n255\n" + bytes([1, 2, 3, 4]))
        assert read_pgm(p).tolist() == [[1, 2], [3, 4]]

    def test_truncated_data(self, tmp_path):
        p = tmp_path / "t.pgm"
        p.write_bytes(b"P5\n2 2\n255\n" + bytes([1, 2]))
        with pytest.raises(ValueError, match="truncated"):
            read_pgm(p)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.pgm"
        p.write_bytes(b"P2\n2 2\n255\n1 2 3 4")
        with pytest.raises(ValueError):
            load_image(p)

    def test_round_trip_byte_identical(self, tmp_path):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, (13, 17), dtype=np.uint8)
        p1 = tmp_path / "a.pgm"
        p2 = tmp_path / "b.pgm"
        write_pgm(img, p1)
        write_pgm(read_pgm(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestPng:
    def test_rgb_png_grayscale(self, tmp_path):
        from PIL import Image

        arr = np.zeros((4, 5, 3), np.uint8)
        arr[:] = (100, 150, 200)
        p = tmp_path / "rgb.png"
        Image.fromarray(arr, "RGB").save(p)
        img = load_image(p)
        assert img.shape == (4, 5)
        assert (img == 141).all()  # 0.299*100 + 0.587*150 + 0.114*200 = 140.75

    def test_gray_png(self, tmp_path):
        from PIL import Image

        arr = np.arange(12, dtype=np.uint8).reshape(3, 4)
        p = tmp_path / "gray.png"
        Image.fromarray(arr, "L").save(p)
        assert (load_image(p) == arr).all()

    def test_16bit_png_rejected(self, tmp_path):
        from PIL import Image

        arr = (np.arange(6, dtype=np.uint16) * 1000).reshape(2, 3)
        p = tmp_path / "deep.png"
        im = Image.new("I;16", (3, 2))
        im.putdata([int(v) for v in arr.ravel()])
        im.save(p)
        with pytest.raises(ValueError, match="unsupported bit depth"):
            load_image(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValueError, match="unreadable"):
            load_image(tmp_path / "nope.png")


class TestGrayscale:
    @pytest.mark.parametrize(
        "rgb,expected",
        [((0, 0, 0), 0), ((255, 255, 255), 255), ((100, 150, 200), 141)],
    )
    def test_worked_values(self, rgb, expected):
        assert to_grayscale(*rgb) == expected

    @given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
    def test_in_range(self, r, g, b):
        assert 0 <= to_grayscale(r, g, b) <= 255


class TestPyramid:
    def test_three_scales_640x512(self):
        img = np.zeros((512, 640), np.uint8)
        pyr = build_pyramid(img, 3)
        assert [(x.shape[1], x.shape[0]) for x in pyr] == [(640, 512), (320, 256), (160, 128)]

    def test_constant_stays_constant(self):
        pyr = build_pyramid(np.full((64, 48), 77, np.uint8), 3)
        assert len(pyr) == 3
        assert all((lvl == 77).all() for lvl in pyr)

    def test_2x2_block_mean(self):
        img = np.array([[10, 20], [30, 40]], np.uint8)
        pyr = build_pyramid(img, 2)
        assert pyr[1].tolist() == [[25]]

    def test_round_half_up(self):
        img = np.array([[10, 11], [11, 11]], np.uint8)  # mean 10.75 -> 11
        assert build_pyramid(img, 2)[1].tolist() == [[11]]

    def test_odd_dims_floor(self):
        img = np.arange(5 * 7, dtype=np.uint8).reshape(5, 7)
        pyr = build_pyramid(img, 2)
        assert pyr[1].shape == (2, 3)

    def test_truncation_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            pyr = build_pyramid(np.zeros((2, 2), np.uint8), 4)
        assert len(pyr) == 2
        assert any("truncated" in r.message for r in caplog.records)

    def test_decimate_mode(self):
        img = np.array([[1, 2], [3, 4]], np.uint8)
        assert build_pyramid(img, 2, decimate=True)[1].tolist() == [[1]]

    @given(st.integers(1, 40), st.integers(1, 40))
    @settings(max_examples=40)
    def test_halving_law(self, w, h):
        img = np.zeros((h, w), np.uint8)
        pyr = build_pyramid(img, 3)
        for k in range(1, len(pyr)):
            assert pyr[k].shape[0] == pyr[k - 1].shape[0] // 2
            assert pyr[k].shape[1] == pyr[k - 1].shape[1] // 2


class TestBoxes:
    @pytest.mark.parametrize(
        "box,k,expected",
        [
            (Box(10, 10, 5, 5), 2, Box(40, 40, 20, 20)),
            (Box(3, 7, 2, 1), 1, Box(6, 14, 4, 2)),
            (Box(9, 9, 4, 4), 0, Box(9, 9, 4, 4)),
        ],
    )
    def test_map_to_base(self, box, k, expected):
        assert map_box_to_base(box, k) == expected

    def test_iou_cases(self):
        assert box_iou(Box(0, 0, 2, 2), Box(0, 0, 2, 2)) == 1.0
        assert box_iou(Box(0, 0, 2, 2), Box(5, 5, 2, 2)) == 0.0
        assert abs(box_iou(Box(0, 0, 2, 2), Box(1, 1, 2, 2)) - 1 / 7) < 1e-12

    @given(st.integers(0, 100), st.integers(0, 100), st.integers(1, 50), st.integers(1, 50), st.integers(0, 3))
    @settings(max_examples=60)
    def test_map_then_unmap_within_tolerance(self, x, y, w, h, k):
        base = Box(x, y, w, h)
        down = Box(x // 2**k, y // 2**k, max(1, w // 2**k), max(1, h // 2**k))
        again = map_box_to_base(down, k)
        slack = 2**k - 1
        assert abs(again.x - base.x) <= slack
        assert abs(again.y - base.y) <= slack
