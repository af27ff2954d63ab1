"""Five-field normalized annotation format: parsing, serialization, coordinate conversion.

Annotation files carry one box per line as ``class x_c y_c w h`` where the
four geometry fields are fractions of the image width/height. Images and
annotation files are paired by filename stem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import SkuscanError

FIELD_COUNT = 5
OUTPUT_DECIMALS = 6


class AnnotationError(SkuscanError):
    """Base for annotation parsing/serialization failures."""


class MalformedLine(AnnotationError):
    """A line had the wrong token count or a non-numeric token."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class RangeViolation(AnnotationError):
    """A parsed field fell outside the normalized-box invariant range."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class InvalidBox(AnnotationError):
    """A box handed to the serializer violates its invariants."""


class NonPositiveImageSize(AnnotationError):
    """Image dimensions must be strictly positive."""


class MissingAnnotation(AnnotationError):
    """An image has no same-stem annotation file next to it."""


@dataclass(frozen=True)
class NormalizedBox:
    """A center-format box in fractions of the image size.

    Invariants: 0 <= x_c, y_c <= 1 and 0 < w, h <= 1; class_id >= 0.
    """

    class_id: int
    x_c: float
    y_c: float
    w: float
    h: float

    def validate(self) -> None:
        if self.class_id < 0:
            raise InvalidBox(f"class_id must be >= 0, got {self.class_id}")
        if not (0.0 <= self.x_c <= 1.0 and 0.0 <= self.y_c <= 1.0):
            raise InvalidBox(f"center out of [0,1]: ({self.x_c}, {self.y_c})")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise InvalidBox(f"size out of (0,1]: ({self.w}, {self.h})")


@dataclass(frozen=True)
class PixelBox:
    """Corner-format box in (real-valued) pixels; x_min <= x_max, y_min <= y_max."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.height)


@dataclass
class AnnotationSet:
    """All boxes of one image, in file order."""

    image_id: str
    boxes: list[NormalizedBox] = field(default_factory=list)


def _parse_line(line_no: int, line: str) -> NormalizedBox:
    tokens = line.split()
    if len(tokens) != FIELD_COUNT:
        raise MalformedLine(line_no, f"expected {FIELD_COUNT} fields, got {len(tokens)}")
    try:
        class_id = int(tokens[0])
    except ValueError:
        raise MalformedLine(line_no, f"class id not an integer: {tokens[0]!r}") from None
    try:
        x_c, y_c, w, h = (float(t) for t in tokens[1:])
    except ValueError:
        raise MalformedLine(line_no, f"non-numeric coordinate in {tokens[1:]!r}") from None

    if class_id < 0:
        raise RangeViolation(line_no, f"negative class id {class_id}")
    if not (0.0 <= x_c <= 1.0):
        raise RangeViolation(line_no, f"x_c={x_c} outside [0,1]")
    if not (0.0 <= y_c <= 1.0):
        raise RangeViolation(line_no, f"y_c={y_c} outside [0,1]")
    if not (0.0 < w <= 1.0):
        raise RangeViolation(line_no, f"w={w} outside (0,1]")
    if not (0.0 < h <= 1.0):
        raise RangeViolation(line_no, f"h={h} outside (0,1]")
    return NormalizedBox(class_id, x_c, y_c, w, h)


def parse_annotation(text: str, image_id: str = "") -> AnnotationSet:
    """Parse annotation text into an ordered AnnotationSet.

    Blank lines and ``#`` comment lines are skipped. Any rejected line raises
    with its 1-based line number; nothing is silently dropped or reordered.
    """
    boxes: list[NormalizedBox] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        boxes.append(_parse_line(line_no, stripped))
    return AnnotationSet(image_id=image_id, boxes=boxes)


def serialize_annotation(boxes: list[NormalizedBox]) -> str:
    """Serialize boxes one per line, 6 decimal places, newline-terminated.

    Raises InvalidBox on any invariant violation. The empty list serializes
    to the empty string.
    """
    lines = []
    for box in boxes:
        box.validate()
        lines.append(
            f"{box.class_id} {box.x_c:.{OUTPUT_DECIMALS}f} {box.y_c:.{OUTPUT_DECIMALS}f} "
            f"{box.w:.{OUTPUT_DECIMALS}f} {box.h:.{OUTPUT_DECIMALS}f}"
        )
    if not lines:
        return ""
    return "\n".join(lines) + "\n"


def sidecar_path(image_path) -> Path:
    """The annotation file paired with an image: same directory, same stem, .txt."""
    return Path(image_path).with_suffix(".txt")


def to_pixels(box: NormalizedBox, img_w: float, img_h: float) -> PixelBox:
    """Convert a normalized center-format box to corner-format pixels."""
    if img_w <= 0 or img_h <= 0:
        raise NonPositiveImageSize(f"image size must be positive, got {img_w}x{img_h}")
    cx = box.x_c * img_w
    cy = box.y_c * img_h
    half_w = box.w * img_w / 2.0
    half_h = box.h * img_h / 2.0
    return PixelBox(cx - half_w, cy - half_h, cx + half_w, cy + half_h)


def to_normalized(class_id: int, box: PixelBox, img_w: float, img_h: float) -> NormalizedBox:
    """Inverse of to_pixels: corner-format pixels back to normalized center format."""
    if img_w <= 0 or img_h <= 0:
        raise NonPositiveImageSize(f"image size must be positive, got {img_w}x{img_h}")
    return NormalizedBox(
        class_id=class_id,
        x_c=(box.x_min + box.x_max) / (2.0 * img_w),
        y_c=(box.y_min + box.y_max) / (2.0 * img_h),
        w=(box.x_max - box.x_min) / img_w,
        h=(box.y_max - box.y_min) / img_h,
    )
