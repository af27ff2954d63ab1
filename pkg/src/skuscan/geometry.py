"""Box and image geometry: tight rotated-box adjustment, IoU, crop-and-pad, rotation.

The rotated-box adjustment mirrors the dataset tooling convention: corners are
rotated about the image center with theta = -angle * pi / 180, the enclosing
axis-aligned box is tightened by a factor t about its own center, clipped to
the image, and renormalized. Image rotation uses the inverse of the same
corner transform so rendered pixels and adjusted boxes stay consistent.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import SkuscanError
from .labelio import NormalizedBox, PixelBox, to_normalized, to_pixels

DEFAULT_PATCH_SIZE = 224
WHITE = (255, 255, 255)


class GeometryError(SkuscanError):
    """Base for geometry failures."""


class InvalidSpec(GeometryError):
    """Rotation spec violates its invariants (tightness out of (0,1])."""


class EmptyCrop(GeometryError):
    """Requested crop box lies entirely outside the image."""


@dataclass(frozen=True)
class Point2:
    x: float
    y: float


@dataclass(frozen=True)
class RotationSpec:
    """Rotation angle plus the tightness factor applied to the rotated AABB.

    t = 1 is admitted as the no-tightening identity; angles are canonicalized
    to [0, 360).
    """

    angle_deg: float
    tightness: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.tightness <= 1.0):
            raise InvalidSpec(f"tightness must be in (0, 1], got {self.tightness}")
        object.__setattr__(self, "angle_deg", self.angle_deg % 360.0)


@dataclass
class Patch:
    """A square crop ready for embedding, with provenance back to its source box."""

    pixels: np.ndarray  # (target, target, 3) uint8
    source_image_id: str
    source_box: PixelBox

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def rotate_point(p: Point2, center: Point2, angle_deg: float) -> Point2:
    """Rotate a point about a center using theta = -angle_deg * pi / 180."""
    theta = -angle_deg * math.pi / 180.0
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    dx = p.x - center.x
    dy = p.y - center.y
    return Point2(
        x=dx * cos_t - dy * sin_t + center.x,
        y=dx * sin_t + dy * cos_t + center.y,
    )


def rotate_tight_box(
    box: NormalizedBox, img_w: float, img_h: float, spec: RotationSpec
) -> NormalizedBox | None:
    """Transform a normalized box under image rotation; None when clipped away.

    Steps, in order: normalized -> pixels -> 4 corners -> rotate corners about
    the image center -> enclosing AABB -> scale width/height by the tightness
    factor about the AABB center -> clip to [0, img_w] x [0, img_h] ->
    renormalize. A clipped box with zero or negative extent is dropped.
    """
    pixel = to_pixels(box, img_w, img_h)
    center = Point2(img_w / 2.0, img_h / 2.0)

    corners = (
        Point2(pixel.x_min, pixel.y_min),
        Point2(pixel.x_max, pixel.y_min),
        Point2(pixel.x_max, pixel.y_max),
        Point2(pixel.x_min, pixel.y_max),
    )
    rotated = [rotate_point(c, center, spec.angle_deg) for c in corners]

    x_min = min(c.x for c in rotated)
    x_max = max(c.x for c in rotated)
    y_min = min(c.y for c in rotated)
    y_max = max(c.y for c in rotated)

    w_r = x_max - x_min
    h_r = y_max - y_min
    x_r = (x_min + x_max) / 2.0
    y_r = (y_min + y_max) / 2.0

    w_t = spec.tightness * w_r
    h_t = spec.tightness * h_r
    x_min = x_r - w_t / 2.0
    x_max = x_r + w_t / 2.0
    y_min = y_r - h_t / 2.0
    y_max = y_r + h_t / 2.0

    x_min = max(0.0, x_min)
    y_min = max(0.0, y_min)
    x_max = min(float(img_w), x_max)
    y_max = min(float(img_h), y_max)

    if x_max - x_min <= 0.0 or y_max - y_min <= 0.0:
        return None
    return to_normalized(box.class_id, PixelBox(x_min, y_min, x_max, y_max), img_w, img_h)


def iou(a: PixelBox, b: PixelBox) -> float:
    """Intersection-over-union; 0 when disjoint or the union is degenerate."""
    ix_min = max(a.x_min, b.x_min)
    iy_min = max(a.y_min, b.y_min)
    ix_max = min(a.x_max, b.x_max)
    iy_max = min(a.y_max, b.y_max)

    iw = max(0.0, ix_max - ix_min)
    ih = max(0.0, iy_max - iy_min)
    inter = iw * ih
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def crop_and_pad(
    image: np.ndarray,
    box: PixelBox,
    target: int = DEFAULT_PATCH_SIZE,
    fill_color: tuple[int, int, int] = WHITE,
    image_id: str = "",
) -> Patch:
    """Crop the box region and letterbox it onto a target x target canvas.

    The crop is clipped to the image, scaled so its longer side equals target
    (bilinear), and centered on a canvas filled with fill_color; odd padding
    splits as floor(half) on the top/left.
    """
    if target < 1:
        raise GeometryError(f"target size must be >= 1, got {target}")
    img_h, img_w = image.shape[:2]
    x0 = int(math.floor(max(0.0, box.x_min)))
    y0 = int(math.floor(max(0.0, box.y_min)))
    x1 = int(math.ceil(min(float(img_w), box.x_max)))
    y1 = int(math.ceil(min(float(img_h), box.y_max)))
    if x1 <= x0 or y1 <= y0:
        raise EmptyCrop(f"box {box} does not intersect {img_w}x{img_h} image")

    crop = image[y0:y1, x0:x1]
    crop_h, crop_w = crop.shape[:2]
    scale = target / max(crop_w, crop_h)
    new_w = target if crop_w >= crop_h else _round_half_up(crop_w * scale)
    new_h = target if crop_h >= crop_w else _round_half_up(crop_h * scale)
    new_w = max(1, new_w)
    new_h = max(1, new_h)

    # fromarray on a non-contiguous slice falls into PIL's slow copy path.
    resized = np.asarray(
        Image.fromarray(np.ascontiguousarray(crop)).resize(
            (new_w, new_h), Image.Resampling.BILINEAR
        )
    )
    r, g, b = fill_color
    if r == g == b:
        canvas = np.full((target, target, 3), r, dtype=np.uint8)
    else:
        canvas = np.empty((target, target, 3), dtype=np.uint8)
        canvas[:, :] = fill_color
    top = (target - new_h) // 2
    left = (target - new_w) // 2
    canvas[top : top + new_h, left : left + new_w] = resized
    return Patch(pixels=canvas, source_image_id=image_id, source_box=box)


@functools.lru_cache(maxsize=8)
def _rotation_plan(img_h: int, img_w: int, angle_deg: float):
    """Flat source indices, bilinear weights, and in-bounds mask for one
    (size, angle) pair. Cached because augmentation sweeps many same-sized
    images through the same angle schedule."""
    cx = img_w / 2.0
    cy = img_h / 2.0
    # Inverse of the forward corner transform: rotate output coords by -angle.
    theta = angle_deg * math.pi / 180.0
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)

    cols = np.arange(img_w, dtype=np.float64) + 0.5 - cx
    rows = np.arange(img_h, dtype=np.float64) + 0.5 - cy
    src_x = ((cols * cos_t)[None, :] - (rows * sin_t)[:, None] + (cx - 0.5)).ravel()
    src_y = ((cols * sin_t)[None, :] + (rows * cos_t)[:, None] + (cy - 0.5)).ravel()

    x0 = np.floor(src_x)
    y0 = np.floor(src_y)
    fx = (src_x - x0)[:, None]
    fy = (src_y - y0)[:, None]
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    valid = (src_x >= 0.0) & (src_x <= img_w - 1.0) & (src_y >= 0.0) & (src_y <= img_h - 1.0)
    x0c = np.clip(x0, 0, img_w - 1)
    y0c = np.clip(y0, 0, img_h - 1)
    x1c = np.clip(x0 + 1, 0, img_w - 1)
    y1c = np.clip(y0 + 1, 0, img_h - 1)
    top_row = y0c * img_w
    bottom_row = y1c * img_w

    weights = (
        (1.0 - fx) * (1.0 - fy),
        fx * (1.0 - fy),
        (1.0 - fx) * fy,
        fx * fy,
    )
    indices = (top_row + x0c, top_row + x1c, bottom_row + x0c, bottom_row + x1c)
    return indices, weights, valid


def rotate_image(
    image: np.ndarray,
    angle_deg: float,
    fill_color: tuple[int, int, int] = WHITE,
) -> np.ndarray:
    """Rotate an image about its center on an unchanged canvas.

    Each output pixel is sampled from the source at the inverse of the
    rotate_point transform (bilinear); samples outside the source take
    fill_color. Pixel (r, c) is treated as the point (c + 0.5, r + 0.5) so
    the rotation center matches the box transform's (img_w/2, img_h/2).
    """
    img_h, img_w = image.shape[:2]
    indices, weights, valid = _rotation_plan(img_h, img_w, float(angle_deg))

    flat = image.reshape(img_h * img_w, -1).astype(np.float64)
    sampled = (
        flat[indices[0]] * weights[0]
        + flat[indices[1]] * weights[1]
        + flat[indices[2]] * weights[2]
        + flat[indices[3]] * weights[3]
    )
    out = np.empty_like(image).reshape(img_h * img_w, -1)
    out[:, :] = fill_color
    out[valid] = np.rint(sampled[valid]).astype(image.dtype)
    return out.reshape(image.shape)
