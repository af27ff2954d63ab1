"""Retail product recognition without retraining: detect products, embed the
crops, and match them against an updatable vector catalog of SKU prototypes.

The package splits along its seams: geometry and dataset tooling feed the
detector side; the embedding space, vector index, and catalog registry form
the recognition core; the pipeline, evaluation kit, HTTP service, and CLI
wrap that core for operation.
"""

from .embedspace import (
    DEFAULT_DIM,
    LabelOracleEmbedder,
    PatchHashEmbedder,
    centroid,
    cosine_similarity,
    normalize,
)
from .errors import SkuscanError
from .evalkit import BenchmarkConfig, incremental_benchmark, map50
from .geometry import RotationSpec, crop_and_pad, rotate_image, rotate_tight_box
from .labelio import NormalizedBox, PixelBox, parse_annotation
from .pipeline import FixtureDetector, Receipt, process_checkout
from .registry import ClassifyParams, Match, SkuRegistry, Unknown
from .service import ApiConfig, create_app
from .vindex import HnswParams, VectorIndex

__version__ = "0.1.0"

__all__ = [
    "ApiConfig",
    "BenchmarkConfig",
    "ClassifyParams",
    "DEFAULT_DIM",
    "FixtureDetector",
    "HnswParams",
    "LabelOracleEmbedder",
    "Match",
    "NormalizedBox",
    "PatchHashEmbedder",
    "PixelBox",
    "Receipt",
    "RotationSpec",
    "SkuRegistry",
    "SkuscanError",
    "Unknown",
    "VectorIndex",
    "centroid",
    "cosine_similarity",
    "create_app",
    "crop_and_pad",
    "incremental_benchmark",
    "map50",
    "normalize",
    "parse_annotation",
    "process_checkout",
    "rotate_image",
    "rotate_tight_box",
    "__version__",
]
