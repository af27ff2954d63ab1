"""Checkout inference path: detect, crop, embed, classify, then build a receipt.

Each detected box is letterboxed to the embedding provider's patch size,
embedded, and classified against the catalog. Match items sum into the
subtotal (integer cents throughout); Unknown items are skipped from the total
and each creates one open flag for operator review. Failures abort the whole
checkout before any flag is committed, so a failed request leaves no trace.

Per-stage wall-clock times are reported on the receipt in milliseconds.
Receipts are deterministic for a fixed image, detector, provider, catalog
state, and params, excluding the timing fields.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
import requests
from PIL import Image

from .embedspace import DEFAULT_DIM, as_embedding, normalize
from .errors import SkuscanError
from .geometry import DEFAULT_PATCH_SIZE, WHITE, Patch, crop_and_pad
from .labelio import MissingAnnotation, PixelBox, parse_annotation, to_pixels
from .registry import ClassifyParams, Decision, Match, SkuRegistry


class PipelineError(SkuscanError):
    """Base for checkout failures."""


class DetectorFailure(PipelineError):
    pass


class ProviderFailure(PipelineError):
    pass


class Unreachable(DetectorFailure):
    pass


class MalformedResponse(DetectorFailure):
    pass


class DetectionTimeout(DetectorFailure):
    pass


@dataclass(frozen=True)
class Detection:
    """One detector box with its confidence, in pixel coordinates."""

    box: PixelBox
    detector_confidence: float

    def __post_init__(self):
        if not 0.0 <= self.detector_confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.detector_confidence}")
        if self.box.x_max <= self.box.x_min or self.box.y_max <= self.box.y_min:
            raise ValueError(f"degenerate detection box {self.box}")


class Detector(Protocol):
    """Anything that finds product boxes in an image.

    Implementations must be deterministic for a fixed input and never return
    degenerate boxes. image_id carries the image's identity for detectors
    that need it (the fixture detector's sidecar lookup).
    """

    def detect(self, image: np.ndarray, image_id: str = "") -> list[Detection]: ...


class FixtureDetector:
    """Ground-truth localization: replays sidecar annotations as detections.

    Isolates recognition behavior from detection quality in tests and demos.
    """

    def __init__(self, annotation_dir: Path):
        self.annotation_dir = Path(annotation_dir)

    def detect(self, image: np.ndarray, image_id: str = "") -> list[Detection]:
        label_path = self.annotation_dir / f"{image_id}.txt"
        if not label_path.is_file():
            raise MissingAnnotation(f"no annotation for image {image_id!r}")
        img_h, img_w = image.shape[:2]
        annotation = parse_annotation(label_path.read_text(), image_id=image_id)
        return [
            Detection(box=to_pixels(box, img_w, img_h), detector_confidence=1.0)
            for box in annotation.boxes
        ]


class RemoteDetector:
    """Adapter to an external HTTP detection service.

    Sends the image as a binary PNG body; expects a JSON array of
    {x_min, y_min, x_max, y_max, confidence} in pixels.
    """

    def __init__(self, endpoint: str, timeout: float = 5.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def detect(self, image: np.ndarray, image_id: str = "") -> list[Detection]:
        buf = io.BytesIO()
        Image.fromarray(image).save(buf, format="PNG")
        try:
            response = requests.post(
                self.endpoint,
                data=buf.getvalue(),
                headers={"Content-Type": "image/png"},
                timeout=self.timeout,
            )
        except requests.Timeout as exc:
            raise DetectionTimeout(f"detector timed out after {self.timeout}s") from exc
        except requests.RequestException as exc:
            raise Unreachable(f"detector unreachable: {exc}") from exc
        if response.status_code != 200:
            raise MalformedResponse(f"detector returned HTTP {response.status_code}")
        try:
            raw = response.json()
            detections = [
                Detection(
                    box=PixelBox(b["x_min"], b["y_min"], b["x_max"], b["y_max"]),
                    detector_confidence=b["confidence"],
                )
                for b in raw
            ]
        except (ValueError, TypeError, KeyError) as exc:
            raise MalformedResponse(f"detector response malformed: {exc}") from exc
        return detections


class RemoteEmbedder:
    """Adapter to an external HTTP embedding model server.

    Sends the patch as a binary PNG body; expects {"embedding": [...]} with
    exactly `dim` finite values. The response vector is normalized here so
    downstream code sees a unit vector regardless of the server.
    """

    def __init__(self, endpoint: str, dim: int = DEFAULT_DIM, timeout: float = 5.0):
        self.endpoint = endpoint
        self.dim = dim
        self.timeout = timeout

    def embed(self, patch: Patch) -> np.ndarray:
        buf = io.BytesIO()
        Image.fromarray(patch.pixels).save(buf, format="PNG")
        try:
            response = requests.post(
                self.endpoint,
                data=buf.getvalue(),
                headers={"Content-Type": "image/png"},
                timeout=self.timeout,
            )
        except requests.Timeout as exc:
            raise ProviderFailure(f"embedder timed out after {self.timeout}s") from exc
        except requests.RequestException as exc:
            raise ProviderFailure(f"embedder unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ProviderFailure(f"embedder returned HTTP {response.status_code}")
        try:
            values = response.json()["embedding"]
        except (ValueError, TypeError, KeyError) as exc:
            raise ProviderFailure(f"embedder response malformed: {exc}") from exc
        return normalize(as_embedding(values, self.dim))


class PatchStore(Protocol):
    """Persists crops of unknown products so operators can look at them."""

    def store(self, patch: Patch) -> str: ...


class NullPatchStore:
    """Discards patches; flags carry an empty patch_ref."""

    def store(self, patch: Patch) -> str:
        return ""


@dataclass(frozen=True)
class LineItem:
    box: PixelBox
    decision: Decision


@dataclass
class Receipt:
    """One checkout's outcome; subtotal covers Match items only."""

    items: list[LineItem] = field(default_factory=list)
    subtotal_cents: int = 0
    unknown_count: int = 0
    flag_ids: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)


def process_checkout(
    image: np.ndarray,
    detector: Detector,
    provider,
    registry: SkuRegistry,
    params: ClassifyParams | None = None,
    *,
    image_id: str = "",
    patch_store: PatchStore | None = None,
    patch_size: int = DEFAULT_PATCH_SIZE,
    fill_color: tuple[int, int, int] = WHITE,
) -> Receipt:
    """Run the full checkout path over one image and return its receipt."""
    params = params or ClassifyParams()
    patch_store = patch_store or NullPatchStore()
    started = time.perf_counter()

    t0 = time.perf_counter()
    try:
        detections = detector.detect(image, image_id)
    except PipelineError:
        raise
    except Exception as exc:
        raise DetectorFailure(f"detector failed: {exc}") from exc
    detect_ms = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    patches: list[Patch] = []
    try:
        for det in detections:
            patches.append(
                crop_and_pad(image, det.box, target=patch_size, fill_color=fill_color,
                             image_id=image_id)
            )
    except Exception as exc:
        raise DetectorFailure(f"detection box unusable: {exc}") from exc
    crop_ms = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    embeddings = []
    try:
        for patch in patches:
            embeddings.append(provider.embed(patch))
    except PipelineError:
        raise
    except Exception as exc:
        raise ProviderFailure(f"embedding provider failed: {exc}") from exc
    embed_ms = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    decisions = [registry.classify(emb, params) for emb in embeddings]
    search_ms = (time.perf_counter() - t0) * 1000.0

    # All stages succeeded; only now commit flags for the Unknown items.
    receipt = Receipt(timings={})
    for det, patch, emb, decision in zip(detections, patches, embeddings, decisions):
        receipt.items.append(LineItem(box=det.box, decision=decision))
        if isinstance(decision, Match):
            receipt.subtotal_cents += decision.price_cents
        else:
            best = None
            if decision.best_sku_id is not None:
                best = (decision.best_sku_id, decision.best_score)
            flag = registry.create_flag(emb, patch_store.store(patch), best)
            receipt.unknown_count += 1
            receipt.flag_ids.append(flag.flag_id)

    receipt.timings = {
        "detect_ms": detect_ms,
        "crop_ms": crop_ms,
        "embed_ms": embed_ms,
        "search_ms": search_ms,
        "total_ms": (time.perf_counter() - started) * 1000.0,
    }
    return receipt
