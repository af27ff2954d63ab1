"""Annotation parsing, serialization, and coordinate conversion."""

from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from skuscan.labelio import (
    InvalidBox,
    MalformedLine,
    NormalizedBox,
    PixelBox,
    RangeViolation,
    parse_annotation,
    serialize_annotation,
    sidecar_path,
    to_normalized,
    to_pixels,
)


def test_parse_single_line():
    ann = parse_annotation("3 0.5 0.25 0.1 0.2\n", image_id="img1")
    assert ann.image_id == "img1"
    assert len(ann.boxes) == 1
    b = ann.boxes[0]
    assert (b.class_id, b.x_c, b.y_c, b.w, b.h) == (3, 0.5, 0.25, 0.1, 0.2)


def test_parse_preserves_order_and_skips_blanks_and_comments():
    text = "# header\n0 0.5 0.5 0.1 0.1\n\n1 0.2 0.2 0.05 0.05\n"
    ann = parse_annotation(text)
    assert [b.class_id for b in ann.boxes] == [0, 1]


def test_parse_empty_text_gives_empty_set():
    assert parse_annotation("").boxes == []


def test_malformed_field_count_reports_line_number():
    with pytest.raises(MalformedLine) as err:
        parse_annotation("0 0.5 0.5 0.1\n")
    assert "line 1" in str(err.value)


def test_malformed_non_numeric():
    with pytest.raises(MalformedLine):
        parse_annotation("0 0.5 abc 0.1 0.1\n")


def test_malformed_class_id():
    with pytest.raises(MalformedLine):
        parse_annotation("zero 0.5 0.5 0.1 0.1\n")


@pytest.mark.parametrize(
    "line",
    [
        "0 1.5 0.5 0.1 0.1",
        "0 0.5 -0.1 0.1 0.1",
        "0 0.5 0.5 0.0 0.1",
        "0 0.5 0.5 0.1 1.1",
        "-1 0.5 0.5 0.1 0.1",
    ],
)
def test_range_violations(line):
    with pytest.raises(RangeViolation):
        parse_annotation(line)


def test_error_line_numbers_count_real_lines():
    text = "# comment\n0 0.5 0.5 0.1 0.1\n0 2.0 0.5 0.1 0.1\n"
    with pytest.raises(RangeViolation) as err:
        parse_annotation(text)
    assert "line 3" in str(err.value)


def test_serialize_fixed_precision_and_trailing_newline():
    out = serialize_annotation([NormalizedBox(7, 0.5, 0.25, 0.125, 1.0)])
    assert out == "7 0.500000 0.250000 0.125000 1.000000\n"


def test_serialize_empty_list_is_empty_string():
    assert serialize_annotation([]) == ""


def test_serialize_rejects_invalid_box():
    bad = NormalizedBox(0, 1.5, 0.5, 0.1, 0.1)
    with pytest.raises(InvalidBox):
        serialize_annotation([bad])


@given(
    class_id=st.integers(0, 999),
    x_c=st.floats(0.0, 1.0),
    y_c=st.floats(0.0, 1.0),
    w=st.floats(0.001, 1.0),
    h=st.floats(0.001, 1.0),
)
def test_serialize_parse_round_trip_within_precision(class_id, x_c, y_c, w, h):
    box = NormalizedBox(class_id, x_c, y_c, w, h)
    text = serialize_annotation([box])
    back = parse_annotation(text).boxes[0]
    assert back.class_id == class_id
    for a, b in [(back.x_c, x_c), (back.y_c, y_c), (back.w, w), (back.h, h)]:
        assert abs(a - b) <= 5e-7  # six emitted decimals


def test_sidecar_path_swaps_suffix():
    assert sidecar_path(Path("/data/shelf-01.png")) == Path("/data/shelf-01.txt")
    assert sidecar_path("relative/img.jpeg") == Path("relative/img.txt")


def test_to_pixels_hand_case():
    box = NormalizedBox(0, 0.5, 0.5, 0.5, 0.25)
    px = to_pixels(box, 640, 480)
    assert (px.x_min, px.y_min, px.x_max, px.y_max) == (160.0, 180.0, 480.0, 300.0)


def test_to_pixels_round_trips_through_to_normalized():
    box = NormalizedBox(4, 0.3, 0.6, 0.2, 0.1)
    px = to_pixels(box, 800, 600)
    back = to_normalized(4, px, 800, 600)
    assert back.x_c == pytest.approx(0.3)
    assert back.y_c == pytest.approx(0.6)
    assert back.w == pytest.approx(0.2)
    assert back.h == pytest.approx(0.1)


def test_pixel_box_measures():
    px = PixelBox(10, 20, 40, 80)
    assert px.width == 30
    assert px.height == 60
    assert px.area() == 1800
