"""Batch rotation augmentation: expand an annotated image directory by a fixed
angle schedule, rewriting each box through the tight-box transform.

Every paired input (image + same-stem ``.txt`` annotation) produces one output
per angle named ``{stem}_rot{angle:03}`` plus, by default, a byte-identical
copy of the original pair. Images without a sidecar are skipped and counted,
not fatal. Re-running with the same config writes byte-identical outputs.
"""

from __future__ import annotations

import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import SkuscanError
from .geometry import WHITE, RotationSpec, rotate_image, rotate_tight_box
from .labelio import (
    AnnotationError,
    MalformedLine,
    parse_annotation,
    serialize_annotation,
    sidecar_path,
)

DEFAULT_ANGLES = tuple(range(10, 360, 10))
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")
# Low PNG compression: outputs are regenerated artifacts, throughput wins.
PNG_COMPRESS_LEVEL = 1


class AugmentError(SkuscanError):
    """Base for dataset generation failures."""


class IoFailure(AugmentError):
    pass


@dataclass(frozen=True)
class AugmentConfig:
    """One augmentation run: where to read, where to write, and the schedule.

    Angles are whole degrees, each in the open interval (0, 360); the default
    schedule is every 10 degrees up to 350. Tightness follows the box
    transform's (0, 1] contract.
    """

    input_dir: Path
    output_dir: Path
    angles: tuple[int, ...] = DEFAULT_ANGLES
    tightness: float = 1.0
    fill_color: tuple[int, int, int] = WHITE
    keep_originals: bool = True

    def __post_init__(self):
        object.__setattr__(self, "input_dir", Path(self.input_dir))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        object.__setattr__(self, "angles", tuple(int(a) for a in self.angles))
        if not self.angles:
            raise ValueError("angles must be non-empty")
        for a in self.angles:
            if not 0 < a < 360:
                raise ValueError(f"angle must be in (0, 360), got {a}")
        if not 0.0 < self.tightness <= 1.0:
            raise ValueError(f"tightness must be in (0, 1], got {self.tightness}")


@dataclass
class AugmentReport:
    """Counts for one run; images_in counts only paired inputs.

    Invariant: images_out = images_in * (len(angles) + keep_originals).
    """

    images_in: int = 0
    images_out: int = 0
    boxes_in: int = 0
    boxes_out: int = 0
    boxes_dropped: int = 0
    images_skipped: int = 0
    elapsed: float = 0.0


@dataclass
class VerifyReport:
    """Dataset health check: pairing, parseability, and box ranges."""

    images: int = 0
    boxes: int = 0
    unpaired_images: list[str] = field(default_factory=list)
    unpaired_labels: list[str] = field(default_factory=list)
    malformed_lines: list[str] = field(default_factory=list)
    range_violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (
            self.unpaired_images
            or self.unpaired_labels
            or self.malformed_lines
            or self.range_violations
        )

    def defects(self) -> list[str]:
        return (
            [f"unpaired image: {p}" for p in self.unpaired_images]
            + [f"unpaired label: {p}" for p in self.unpaired_labels]
            + [f"malformed: {p}" for p in self.malformed_lines]
            + [f"range: {p}" for p in self.range_violations]
        )


def list_images(directory: Path) -> list[Path]:
    """Image files under a directory, sorted by name for stable ordering."""
    return sorted(
        p for p in Path(directory).iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )


def _save_image(array: np.ndarray, path: Path):
    img = Image.fromarray(array)
    try:
        if path.suffix.lower() == ".png":
            img.save(path, compress_level=PNG_COMPRESS_LEVEL)
        else:
            img.save(path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def generate_rotated_dataset(config: AugmentConfig) -> AugmentReport:
    """Write the rotated dataset and return its counts.

    For each paired input and each configured angle, emits the rotated image
    and the annotation produced by pushing every box through the tight-box
    transform; boxes the transform drops (clipped to nothing) are counted.
    """
    if not config.input_dir.is_dir():
        raise IoFailure(f"input directory does not exist: {config.input_dir}")
    try:
        config.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {config.output_dir}: {exc}") from exc

    report = AugmentReport()
    started = time.perf_counter()
    paired: list[tuple[Path, Path]] = []
    for image_path in list_images(config.input_dir):
        label_path = sidecar_path(image_path)
        if label_path.is_file():
            paired.append((image_path, label_path))
        else:
            report.images_skipped += 1

    annotations = {}
    for image_path, label_path in paired:
        annotation = parse_annotation(label_path.read_text(), image_id=image_path.stem)
        annotations[image_path] = annotation
        report.images_in += 1
        report.boxes_in += len(annotation.boxes)
        if config.keep_originals:
            shutil.copyfile(image_path, config.output_dir / image_path.name)
            shutil.copyfile(label_path, config.output_dir / label_path.name)
            report.images_out += 1
            report.boxes_out += len(annotation.boxes)

    # Angle-outer order keeps the rotation's per-(size, angle) sampling plan
    # cache hot across a whole pass of same-sized images.
    for angle in config.angles:
        spec = RotationSpec(angle_deg=angle, tightness=config.tightness)
        for image_path, _ in paired:
            try:
                with Image.open(image_path) as img:
                    pixels = np.asarray(img.convert("RGB"))
            except OSError as exc:
                raise IoFailure(f"cannot read {image_path}: {exc}") from exc
            img_h, img_w = pixels.shape[:2]
            rotated = rotate_image(pixels, angle, config.fill_color)
            kept = []
            for box in annotations[image_path].boxes:
                moved = rotate_tight_box(box, img_w, img_h, spec)
                if moved is None:
                    report.boxes_dropped += 1
                else:
                    kept.append(moved)
            stem = f"{image_path.stem}_rot{angle:03d}"
            _save_image(rotated, config.output_dir / f"{stem}{image_path.suffix}")
            (config.output_dir / f"{stem}.txt").write_text(serialize_annotation(kept))
            report.images_out += 1
            report.boxes_out += len(kept)

    report.elapsed = time.perf_counter() - started
    return report


def verify_dataset(directory: Path) -> VerifyReport:
    """Check pairing and annotation validity for every file in a dataset."""
    directory = Path(directory)
    if not directory.is_dir():
        raise IoFailure(f"directory does not exist: {directory}")

    report = VerifyReport()
    images = list_images(directory)
    image_stems = {p.stem for p in images}
    labels = sorted(directory.glob("*.txt"))
    label_stems = {p.stem for p in labels}

    for image_path in images:
        report.images += 1
        if image_path.stem not in label_stems:
            report.unpaired_images.append(image_path.name)
    for label_path in labels:
        if label_path.stem not in image_stems:
            report.unpaired_labels.append(label_path.name)
            continue
        for line_no, line in enumerate(label_path.read_text().splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            where = f"{label_path.name}:{line_no}"
            try:
                parsed = parse_annotation(stripped)
            except MalformedLine as exc:
                report.malformed_lines.append(f"{where}: {exc}")
                continue
            except AnnotationError as exc:
                report.range_violations.append(f"{where}: {exc}")
                continue
            report.boxes += len(parsed.boxes)
    return report
