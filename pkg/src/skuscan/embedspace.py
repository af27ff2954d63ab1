"""Embedding vectors, similarity/prototype math, and pluggable embedding providers.

Embeddings are numpy float arrays of a fixed dimension (384 by default, the
width of the small vision-transformer family of backbones). Providers map a
square image patch to one embedding; two deterministic providers are included
so the recognition stack can be exercised without any trained model:

* PatchHashEmbedder projects a downsampled grayscale of the patch through a
  fixed seeded matrix - identical pixels give bit-identical embeddings.
* LabelOracleEmbedder synthesizes a separable space from class anchors; the
  patch's class is read back from a color code painted into fixture images.
"""

from __future__ import annotations

import zlib
from typing import Protocol

import numpy as np
from PIL import Image

from .errors import SkuscanError
from .geometry import Patch

DEFAULT_DIM = 384
_HASH_GRID = 16  # PatchHashEmbedder downsample resolution


class EmbeddingError(SkuscanError):
    """Base for embedding math failures."""


class ZeroVector(EmbeddingError):
    """Operation undefined on the zero vector."""


class DimMismatch(EmbeddingError):
    """Operand dimensions disagree."""


class EmptyList(EmbeddingError):
    """A non-empty collection of embeddings was required."""


def as_embedding(values, dim: int | None = None) -> np.ndarray:
    """Coerce to a 1-D float64 vector, checking finiteness and optional dim."""
    e = np.asarray(values, dtype=np.float64).reshape(-1)
    if dim is not None and e.shape[0] != dim:
        raise DimMismatch(f"expected dim {dim}, got {e.shape[0]}")
    if not np.all(np.isfinite(e)):
        raise EmbeddingError("embedding contains non-finite values")
    return e


def normalize(e: np.ndarray) -> np.ndarray:
    """Return e / ||e||_2. Raises ZeroVector when the norm is zero."""
    e = np.asarray(e, dtype=np.float64)
    norm = float(np.linalg.norm(e))
    if norm == 0.0:
        raise ZeroVector("cannot normalize the zero vector")
    return e / norm


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product over the norm product, clamped to [-1, 1] against rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatch(f"shape {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine similarity undefined for the zero vector")
    return float(np.clip(float(a @ b) / (norm_a * norm_b), -1.0, 1.0))


def centroid(refs: list[np.ndarray]) -> np.ndarray:
    """Unit-normalized arithmetic mean of the reference embeddings."""
    if not refs:
        raise EmptyList("centroid of an empty reference list")
    dim = np.asarray(refs[0]).shape[0]
    stacked = np.empty((len(refs), dim), dtype=np.float64)
    for i, r in enumerate(refs):
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (dim,):
            raise DimMismatch(f"reference {i} has shape {r.shape}, expected ({dim},)")
        stacked[i] = r
    return normalize(stacked.mean(axis=0))


class EmbeddingProvider(Protocol):
    """Anything that maps a patch to a fixed-dimension embedding.

    Implementations must be deterministic for a fixed instance and return
    finite vectors of length `dim`.
    """

    dim: int

    def embed(self, patch: Patch) -> np.ndarray: ...


def _luma_grid(pixels: np.ndarray, grid: int = _HASH_GRID) -> np.ndarray:
    """Downsample to a grid x grid grayscale in [0, 1] (Rec.601 luma, bilinear)."""
    rgb = pixels.astype(np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    img = Image.fromarray((luma / 255.0).astype(np.float32), mode="F")
    small = img.resize((grid, grid), Image.Resampling.BILINEAR)
    return np.asarray(small, dtype=np.float64).reshape(-1)


class PatchHashEmbedder:
    """Deterministic stand-in for a trained backbone.

    Pipeline: 16x16 grayscale downsample -> flatten to 256 reals in [0, 1] ->
    multiply by a fixed seeded dim x 256 projection -> unit-normalize.
    """

    def __init__(self, seed: int = 0, dim: int = DEFAULT_DIM):
        self.seed = seed
        self.dim = dim
        rng = np.random.default_rng(seed)
        self._projection = rng.standard_normal((dim, _HASH_GRID * _HASH_GRID))

    def embed(self, patch: Patch) -> np.ndarray:
        flat = _luma_grid(patch.pixels)
        projected = self._projection @ flat
        norm = float(np.linalg.norm(projected))
        if norm == 0.0:
            # All-zero grid can only arise from an all-black patch; nudge the
            # projection input so the output stays a valid unit vector.
            projected = self._projection @ np.full(flat.shape, 1e-3)
            norm = float(np.linalg.norm(projected))
        return projected / norm


def encode_class_color(class_id: int) -> tuple[int, int, int]:
    """Color code for painting a class id into synthetic fixture images.

    Channels carry base-16 digits centered in 16-value bins, so the id
    survives mild blur/noise. Supports ids 0..4095.
    """
    if not (0 <= class_id < 4096):
        raise ValueError(f"class id out of encodable range: {class_id}")
    r = (class_id % 16) * 16 + 8
    g = ((class_id // 16) % 16) * 16 + 8
    b = ((class_id // 256) % 16) * 16 + 8
    return (r, g, b)


def decode_class_color(rgb: tuple[float, float, float]) -> int:
    digits = [int(np.clip(round((v - 8) / 16.0), 0, 15)) for v in rgb]
    return digits[0] + digits[1] * 16 + digits[2] * 256


class LabelOracleEmbedder:
    """Harness provider with a separable synthetic embedding space.

    Each class id owns a seeded unit anchor; a sample is the anchor plus a
    unit perturbation scaled by noise_scale, renormalized. Patches are mapped
    to classes by decoding the color code at the patch center, and the noise
    draw is derived from the patch bytes, so identical patches embed
    identically while distinct samples of one class scatter around its anchor.
    """

    def __init__(self, seed: int = 0, noise_scale: float = 0.1, dim: int = DEFAULT_DIM):
        self.seed = seed
        self.noise_scale = noise_scale
        self.dim = dim
        self._anchors: dict[int, np.ndarray] = {}

    def anchor(self, class_id: int) -> np.ndarray:
        cached = self._anchors.get(class_id)
        if cached is None:
            rng = np.random.default_rng([self.seed, 0xA, class_id])
            cached = normalize(rng.standard_normal(self.dim))
            self._anchors[class_id] = cached
        return cached

    def sample(self, class_id: int, draw: int) -> np.ndarray:
        """Deterministic draw number `draw` for a class."""
        rng = np.random.default_rng([self.seed, 0xB, class_id, draw])
        noise = rng.standard_normal(self.dim)
        noise /= float(np.linalg.norm(noise))
        return normalize(self.anchor(class_id) + self.noise_scale * noise)

    def embed(self, patch: Patch) -> np.ndarray:
        h, w = patch.pixels.shape[:2]
        half = max(1, min(h, w) // 8)
        region = patch.pixels[h // 2 - half : h // 2 + half, w // 2 - half : w // 2 + half]
        mean_rgb = region.reshape(-1, 3).mean(axis=0)
        class_id = decode_class_color(tuple(mean_rgb))
        draw = zlib.crc32(patch.pixels.tobytes())
        return self.sample(class_id, draw)


def random_unit_vectors(count: int, dim: int, seed: int) -> np.ndarray:
    """(count, dim) float32 matrix of seeded random unit vectors."""
    rng = np.random.default_rng(seed)
    vecs = rng.standard_normal((count, dim))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    return vecs.astype(np.float32)
