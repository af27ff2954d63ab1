"""HTTP JSON API over the catalog, checkout pipeline, flag queue, and snapshots.

All routes live under /v1 and every non-2xx response carries the same error
body shape: {code, message, details?}. Mutating endpoints are atomic — a
failed request leaves catalog, index, and flag queue unchanged — and all
writes serialize through one lock, matching the registry's single-writer
contract. Request validation failures return 400 rather than the framework
default so clients see one consistent error shape.

Auth is an optional static bearer token; when configured, every route except
/v1/healthz requires it.
"""

from __future__ import annotations

import base64
import dataclasses
import hashlib
import io
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import APIRouter, Depends, FastAPI, Query, Request
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field
from PIL import Image, UnidentifiedImageError
from starlette.concurrency import run_in_threadpool
from starlette.exceptions import HTTPException as StarletteHTTPException

from .augment import IMAGE_EXTENSIONS
from .embedspace import (
    DEFAULT_DIM,
    EmbeddingError,
    LabelOracleEmbedder,
    PatchHashEmbedder,
    as_embedding,
)
from .errors import SkuscanError
from .geometry import DEFAULT_PATCH_SIZE, Patch, crop_and_pad
from .labelio import PixelBox
from .pipeline import (
    DetectorFailure,
    FixtureDetector,
    ProviderFailure,
    Receipt,
    RemoteDetector,
    RemoteEmbedder,
    process_checkout,
)
from .registry import (
    DEFAULT_K,
    DEFAULT_TAU,
    ClassifyParams,
    DuplicateSku,
    EmptyReferences,
    FlagNotOpen,
    Match,
    SkuRecord,
    SkuRegistry,
    UnknownFlag,
    UnknownFlagId,
    UnknownSku,
)
from .vindex import HnswParams, SnapshotError, VectorIndex

DETECTOR_MODES = ("fixture", "remote")
PROVIDER_MODES = ("patch-hash", "label-oracle", "external")


class ConfigError(SkuscanError):
    """The service configuration is inconsistent."""


class ApiError(SkuscanError):
    """An error with a fixed HTTP status and machine-readable code."""

    def __init__(self, status: int, code: str, message: str, details=None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details


@dataclass(frozen=True)
class ApiConfig:
    """Service wiring: exactly one detector mode and one provider mode.

    Environment overrides (BIND_ADDR, TAU_DEFAULT, SNAPSHOT_PATH, AUTH_TOKEN)
    are applied by with_env_overrides, not implicitly.
    """

    host: str = "127.0.0.1"
    port: int = 8000
    tau_default: float = DEFAULT_TAU
    k_default: int = DEFAULT_K
    dim: int = DEFAULT_DIM
    snapshot_path: Path = Path("snapshot.bin")
    detector_mode: str = "fixture"
    fixture_dir: Path = Path("fixtures")
    detector_endpoint: str = ""
    provider_mode: str = "patch-hash"
    provider_endpoint: str = ""
    provider_seed: int = 0
    noise_scale: float = 0.1
    auth_token: str = ""
    patch_dir: Path = Path("patches")
    index_params: HnswParams = field(default_factory=HnswParams)

    def __post_init__(self):
        for name in ("snapshot_path", "fixture_dir", "patch_dir"):
            object.__setattr__(self, name, Path(getattr(self, name)))
        if self.detector_mode not in DETECTOR_MODES:
            raise ConfigError(f"detector_mode must be one of {DETECTOR_MODES}")
        if self.provider_mode not in PROVIDER_MODES:
            raise ConfigError(f"provider_mode must be one of {PROVIDER_MODES}")
        if self.detector_mode == "remote" and not self.detector_endpoint:
            raise ConfigError("remote detector mode requires detector_endpoint")
        if self.provider_mode == "external" and not self.provider_endpoint:
            raise ConfigError("external provider mode requires provider_endpoint")
        if not -1.0 < self.tau_default < 1.0:
            raise ConfigError(f"tau_default must be in (-1, 1), got {self.tau_default}")
        if self.k_default < 1:
            raise ConfigError("k_default must be >= 1")
        if not 0 < self.port < 65536:
            raise ConfigError(f"port must be in (0, 65536), got {self.port}")

    @classmethod
    def from_file(cls, path) -> "ApiConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "index_params" in raw:
            raw["index_params"] = HnswParams(**raw["index_params"])
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(f"bad config value: {exc}") from exc

    def with_env_overrides(self, env=None) -> "ApiConfig":
        env = os.environ if env is None else env
        updates = {}
        if env.get("BIND_ADDR"):
            host, _, port = env["BIND_ADDR"].rpartition(":")
            if not host or not port.isdigit():
                raise ConfigError(f"BIND_ADDR must be host:port, got {env['BIND_ADDR']!r}")
            updates["host"], updates["port"] = host, int(port)
        if env.get("TAU_DEFAULT"):
            try:
                updates["tau_default"] = float(env["TAU_DEFAULT"])
            except ValueError as exc:
                raise ConfigError(f"TAU_DEFAULT must be a float: {exc}") from exc
        if env.get("SNAPSHOT_PATH"):
            updates["snapshot_path"] = Path(env["SNAPSHOT_PATH"])
        if env.get("AUTH_TOKEN"):
            updates["auth_token"] = env["AUTH_TOKEN"]
        return dataclasses.replace(self, **updates) if updates else self


class MetricsAggregator:
    """Per-stage latency summaries: count, mean, p95.

    p95 is the sorted sample at index ceil(0.95 * n) - 1. Samples are capped
    per stage; past the cap the window slides (oldest samples drop).
    """

    def __init__(self, capacity: int = 100_000):
        self.capacity = capacity
        self._samples: dict[str, list[float]] = {}
        self._lock = threading.Lock()

    def record(self, stage: str, ms: float) -> None:
        with self._lock:
            bucket = self._samples.setdefault(stage, [])
            bucket.append(ms)
            if len(bucket) > self.capacity:
                del bucket[0]

    def summary(self) -> dict[str, dict[str, float]]:
        with self._lock:
            out = {}
            for stage, values in sorted(self._samples.items()):
                ordered = sorted(values)
                n = len(ordered)
                p95 = ordered[min(n - 1, max(0, -(-95 * n // 100) - 1))]
                out[stage] = {
                    "count": n,
                    "mean_ms": sum(ordered) / n,
                    "p95_ms": p95,
                }
            return out


class DirectoryPatchStore:
    """Content-addressed PNG store for unknown-product crops.

    The ref is the SHA-256 of the encoded bytes, so identical patches share
    one file and refs are safe to echo to clients.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def store(self, patch: Patch) -> str:
        buf = io.BytesIO()
        Image.fromarray(patch.pixels).save(buf, format="PNG")
        data = buf.getvalue()
        ref = hashlib.sha256(data).hexdigest() + ".png"
        target = self.root / ref
        if not target.exists():
            target.write_bytes(data)
        return ref

    def load(self, patch_ref: str) -> bytes | None:
        if not patch_ref or "/" in patch_ref or "\\" in patch_ref or ".." in patch_ref:
            return None
        target = self.root / patch_ref
        return target.read_bytes() if target.is_file() else None


class Engine:
    """Mutable service state: the pieces a snapshot load swaps out live here."""

    def __init__(self, config: ApiConfig):
        self.config = config
        self.index = VectorIndex(dim=config.dim, params=config.index_params)
        self.registry = SkuRegistry(self.index)
        self.tau_default = config.tau_default
        self.detector = self._build_detector(config)
        self.provider = self._build_provider(config)
        self.patch_store = DirectoryPatchStore(config.patch_dir)
        self.metrics = MetricsAggregator()
        self.write_lock = threading.RLock()

    @staticmethod
    def _build_detector(config: ApiConfig):
        if config.detector_mode == "fixture":
            return FixtureDetector(config.fixture_dir)
        return RemoteDetector(config.detector_endpoint)

    @staticmethod
    def _build_provider(config: ApiConfig):
        if config.provider_mode == "patch-hash":
            return PatchHashEmbedder(seed=config.provider_seed, dim=config.dim)
        if config.provider_mode == "label-oracle":
            return LabelOracleEmbedder(
                seed=config.provider_seed, noise_scale=config.noise_scale, dim=config.dim
            )
        return RemoteEmbedder(config.provider_endpoint, dim=config.dim)

    def classify_params(self) -> ClassifyParams:
        return ClassifyParams(tau=self.tau_default, k=self.config.k_default)

    def catalog_path(self) -> Path:
        return Path(f"{self.config.snapshot_path}.catalog.json")


# ------------------------------------------------------------ serialization


def sku_to_json(record: SkuRecord, include_vector: bool = False) -> dict:
    body = {
        "sku_id": record.sku_id,
        "name": record.name,
        "price_cents": record.price_cents,
        "category": record.category,
        "reference_count": record.reference_count,
        "registered_at": record.registered_at,
        "record_id": record.record_id,
    }
    if include_vector:
        body["centroid"] = [float(x) for x in record.centroid]
    return body


def flag_to_json(flag: UnknownFlag) -> dict:
    return {
        "flag_id": flag.flag_id,
        "status": flag.status,
        "best_sku_id": flag.best_sku_id,
        "best_score": flag.best_score,
        "patch_ref": flag.patch_ref,
        "created_at": flag.created_at,
    }


def receipt_to_json(receipt: Receipt, image_id: str) -> dict:
    items = []
    flag_iter = iter(receipt.flag_ids)
    for item in receipt.items:
        box = {
            "x_min": item.box.x_min,
            "y_min": item.box.y_min,
            "x_max": item.box.x_max,
            "y_max": item.box.y_max,
        }
        if isinstance(item.decision, Match):
            decision = {
                "kind": "match",
                "sku_id": item.decision.sku_id,
                "name": item.decision.name,
                "price_cents": item.decision.price_cents,
                "score": item.decision.score,
            }
        else:
            decision = {
                "kind": "unknown",
                "best_sku_id": item.decision.best_sku_id,
                "best_score": item.decision.best_score,
                "flag_id": next(flag_iter),
            }
        items.append({"box": box, "decision": decision})
    return {
        "image_id": image_id,
        "items": items,
        "subtotal_cents": receipt.subtotal_cents,
        "unknown_count": receipt.unknown_count,
        "flag_ids": receipt.flag_ids,
        "timings": receipt.timings,
    }


def error_body(code: str, message: str, details=None) -> dict:
    body = {"code": code, "message": message}
    if details is not None:
        body["details"] = details
    return body


# ----------------------------------------------------------- request bodies


class SkuBody(BaseModel):
    sku_id: str = Field(min_length=1)
    name: str = Field(min_length=1)
    price_cents: int = Field(ge=0)
    category: str = ""
    references: list[str | list[float]] = Field(min_length=1)


class SkuBatchBody(BaseModel):
    skus: list[SkuBody] = Field(min_length=1)


class PriceBody(BaseModel):
    price_cents: int = Field(ge=0)


class ResolveBody(BaseModel):
    sku_id: str = Field(min_length=1)
    name: str = ""
    price_cents: int = Field(default=0, ge=0)
    category: str = ""


class SnapshotBody(BaseModel):
    path: str = ""


# ------------------------------------------------------------------- app


def _decode_image_bytes(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ApiError(400, "bad_request", f"payload is not a decodable image: {exc}") from exc


def _references_to_embeddings(references, engine: Engine) -> list[np.ndarray]:
    """Decode mixed references: base64 images run through the provider,
    numeric lists are taken as embeddings verbatim."""
    out = []
    for i, ref in enumerate(references):
        if isinstance(ref, str):
            try:
                data = base64.b64decode(ref, validate=True)
            except (ValueError, TypeError) as exc:
                raise ApiError(
                    400, "validation_error", f"references[{i}] is not valid base64: {exc}"
                ) from exc
            pixels = _decode_image_bytes(data)
            h, w = pixels.shape[:2]
            patch = crop_and_pad(pixels, PixelBox(0, 0, w, h), target=DEFAULT_PATCH_SIZE)
            try:
                out.append(engine.provider.embed(patch))
            except Exception as exc:
                raise ProviderFailure(f"embedding provider failed: {exc}") from exc
        else:
            try:
                out.append(as_embedding(ref, engine.index.dim))
            except EmbeddingError as exc:
                raise ApiError(400, "validation_error", f"references[{i}]: {exc}") from exc
    return out


def _load_fixture_image(engine: Engine, fixture_id: str) -> np.ndarray:
    if not fixture_id or "/" in fixture_id or "\\" in fixture_id or ".." in fixture_id:
        raise ApiError(400, "bad_request", f"bad fixture id {fixture_id!r}")
    for ext in IMAGE_EXTENSIONS:
        candidate = engine.config.fixture_dir / f"{fixture_id}{ext}"
        if candidate.is_file():
            return _decode_image_bytes(candidate.read_bytes())
    raise ApiError(400, "bad_request", f"no fixture image named {fixture_id!r}")


async def _auth_guard(request: Request):
    token = request.app.state.engine.config.auth_token
    if not token:
        return
    header = request.headers.get("authorization", "")
    if header != f"Bearer {token}":
        raise ApiError(401, "unauthorized", "missing or invalid bearer token")


def create_app(config: ApiConfig | None = None, engine: Engine | None = None) -> FastAPI:
    """Build the FastAPI app; pass an Engine to preserve state across apps."""
    engine = engine or Engine(config or ApiConfig())
    app = FastAPI(title="skuscan", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.engine = engine

    public = APIRouter(prefix="/v1")
    api = APIRouter(prefix="/v1", dependencies=[Depends(_auth_guard)])

    # ------------------------------------------------------------- errors

    def _json_error(status: int, code: str, message: str, details=None) -> JSONResponse:
        return JSONResponse(status_code=status, content=error_body(code, message, details))

    @app.exception_handler(ApiError)
    async def _api_error(request, exc: ApiError):
        return _json_error(exc.status, exc.code, exc.message, exc.details)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request, exc: RequestValidationError):
        return _json_error(
            400, "validation_error", "request body failed validation",
            details=jsonable_encoder(exc.errors(), exclude={"input", "ctx"}),
        )

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request, exc: StarletteHTTPException):
        codes = {401: "unauthorized", 404: "not_found", 405: "method_not_allowed"}
        return _json_error(exc.status_code, codes.get(exc.status_code, "error"), str(exc.detail))

    @app.exception_handler(SkuscanError)
    async def _domain_error(request, exc: SkuscanError):
        mapping = [
            (DuplicateSku, 409, "duplicate_sku"),
            (UnknownSku, 404, "unknown_sku"),
            (UnknownFlagId, 404, "unknown_flag"),
            (FlagNotOpen, 409, "flag_not_open"),
            (EmptyReferences, 400, "validation_error"),
            (EmbeddingError, 400, "validation_error"),
            (DetectorFailure, 422, "detector_failure"),
            (ProviderFailure, 422, "provider_failure"),
            (SnapshotError, 500, "io_failure"),
        ]
        for klass, status, code in mapping:
            if isinstance(exc, klass):
                return _json_error(status, code, str(exc))
        return _json_error(400, "bad_request", str(exc))

    @app.exception_handler(ValueError)
    async def _value_error(request, exc: ValueError):
        return _json_error(400, "validation_error", str(exc))

    # ----------------------------------------------------------- checkout

    @api.post("/checkout")
    async def checkout(request: Request):
        content_type = request.headers.get("content-type", "").split(";")[0].strip()
        body = await request.body()
        image_id = ""
        if content_type in ("image/png", "image/jpeg"):
            image = _decode_image_bytes(body)
        elif content_type == "application/json" or not content_type:
            try:
                payload = json.loads(body or b"{}")
            except json.JSONDecodeError as exc:
                raise ApiError(400, "bad_request", f"body is not valid JSON: {exc}") from exc
            if not isinstance(payload, dict):
                raise ApiError(400, "bad_request", "JSON body must be an object")
            if "fixture_id" in payload:
                image_id = str(payload["fixture_id"])
                image = _load_fixture_image(engine, image_id)
            elif "image_base64" in payload:
                try:
                    data = base64.b64decode(payload["image_base64"], validate=True)
                except (ValueError, TypeError) as exc:
                    raise ApiError(400, "bad_request", f"image_base64 invalid: {exc}") from exc
                image = _decode_image_bytes(data)
                image_id = str(payload.get("image_id", ""))
            else:
                raise ApiError(400, "bad_request", "provide fixture_id or image_base64")
        else:
            raise ApiError(400, "bad_request", f"unsupported content type {content_type!r}")

        # Classification is read-only; the single flag-queue write inside is
        # already serialized by the registry, so checkouts run concurrently.
        receipt = await run_in_threadpool(
            process_checkout,
            image,
            engine.detector,
            engine.provider,
            engine.registry,
            engine.classify_params(),
            image_id=image_id,
            patch_store=engine.patch_store,
        )
        for stage, ms in receipt.timings.items():
            engine.metrics.record(stage, ms)
        return receipt_to_json(receipt, image_id)

    # ------------------------------------------------------------ catalog

    @api.post("/skus", status_code=201)
    def create_sku(body: SkuBody, include_vector: bool = Query(default=False)):
        with engine.write_lock:
            if engine.registry.has_sku(body.sku_id):
                raise DuplicateSku(f"sku {body.sku_id!r} already registered")
            refs = _references_to_embeddings(body.references, engine)
            record = engine.registry.register_sku(
                body.sku_id, body.name, body.price_cents, body.category, refs
            )
        return sku_to_json(record, include_vector)

    @api.post("/skus:batch", status_code=201)
    def create_skus_batch(body: SkuBatchBody):
        # Atomicity: fail on any problem before the first registration.
        with engine.write_lock:
            seen = set()
            for sku in body.skus:
                if sku.sku_id in seen:
                    raise ApiError(
                        400, "validation_error", f"duplicate sku_id in batch: {sku.sku_id!r}"
                    )
                seen.add(sku.sku_id)
                if engine.registry.has_sku(sku.sku_id):
                    raise DuplicateSku(f"sku {sku.sku_id!r} already registered")
            decoded = [_references_to_embeddings(sku.references, engine) for sku in body.skus]
            records = [
                engine.registry.register_sku(
                    sku.sku_id, sku.name, sku.price_cents, sku.category, refs
                )
                for sku, refs in zip(body.skus, decoded)
            ]
        return {"skus": [sku_to_json(r) for r in records], "count": len(records)}

    @api.get("/skus")
    def list_skus(include_vector: bool = Query(default=False)):
        records = engine.registry.list_skus()
        return {"skus": [sku_to_json(r, include_vector) for r in records], "count": len(records)}

    @api.get("/skus/{sku_id}")
    def get_sku(sku_id: str, include_vector: bool = Query(default=False)):
        return sku_to_json(engine.registry.get_sku(sku_id), include_vector)

    @api.patch("/skus/{sku_id}")
    def patch_sku(sku_id: str, body: PriceBody):
        with engine.write_lock:
            record = engine.registry.update_price(sku_id, body.price_cents)
        return sku_to_json(record)

    @api.delete("/skus/{sku_id}", status_code=204)
    def delete_sku(sku_id: str):
        with engine.write_lock:
            engine.registry.remove_sku(sku_id)
        return Response(status_code=204)

    # -------------------------------------------------------------- flags

    @api.get("/flags")
    def list_flags(status: str | None = Query(default=None)):
        if status is not None and status not in ("open", "resolved", "dismissed"):
            raise ApiError(400, "validation_error", f"bad status filter {status!r}")
        flags = engine.registry.list_flags(status)
        return {"flags": [flag_to_json(f) for f in flags], "count": len(flags)}

    @api.get("/flags/{flag_id}")
    def get_flag(flag_id: str):
        flag = engine.registry.get_flag(flag_id)
        body = flag_to_json(flag)
        patch_bytes = engine.patch_store.load(flag.patch_ref)
        body["patch_png_base64"] = (
            base64.b64encode(patch_bytes).decode("ascii") if patch_bytes else None
        )
        return body

    @api.post("/flags/{flag_id}/resolve")
    def resolve_flag(flag_id: str, body: ResolveBody):
        with engine.write_lock:
            is_new = not engine.registry.has_sku(body.sku_id)
            if is_new and not body.name:
                raise ApiError(
                    400, "validation_error", "a new SKU needs name, price_cents, and category"
                )
            record = engine.registry.resolve_flag(
                flag_id, body.sku_id, body.name, body.price_cents, body.category
            )
        return sku_to_json(record)

    @api.post("/flags/{flag_id}/dismiss")
    def dismiss_flag(flag_id: str):
        with engine.write_lock:
            flag = engine.registry.dismiss_flag(flag_id)
        return flag_to_json(flag)

    # ---------------------------------------------------------- snapshots

    @api.post("/snapshot/save")
    def snapshot_save(body: SnapshotBody | None = None):
        path = Path(body.path) if body and body.path else engine.config.snapshot_path
        catalog = Path(f"{path}.catalog.json")
        with engine.write_lock:
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                engine.index.save_snapshot(path)
                catalog.write_text(engine.registry.to_json(engine.tau_default))
            except OSError as exc:
                raise ApiError(500, "io_failure", f"snapshot save failed: {exc}") from exc
        return {
            "index_path": str(path),
            "catalog_path": str(catalog),
            "record_count": len(engine.index),
            "sku_count": len(engine.registry),
        }

    @api.post("/snapshot/load")
    def snapshot_load(body: SnapshotBody | None = None):
        path = Path(body.path) if body and body.path else engine.config.snapshot_path
        catalog = Path(f"{path}.catalog.json")
        with engine.write_lock:
            try:
                catalog_text = catalog.read_text()
            except OSError as exc:
                raise ApiError(500, "io_failure", f"catalog read failed: {exc}") from exc
            index = VectorIndex.load_snapshot(path, params=engine.config.index_params)
            registry = SkuRegistry.from_json(catalog_text, index)
            engine.index = index
            engine.registry = registry
            engine.tau_default = json.loads(catalog_text).get(
                "tau_default", engine.config.tau_default
            )
        return {"record_count": len(index), "sku_count": len(registry)}

    # ------------------------------------------------------------- health

    @public.get("/healthz")
    def healthz():
        try:
            from importlib.metadata import version

            build = version("skuscan")
        except Exception:
            build = "unknown"
        return {
            "status": "ok",
            "version": build,
            "dim": engine.index.dim,
            "sku_count": len(engine.registry),
            "index_size": len(engine.index),
            "open_flags": len(engine.registry.list_flags("open")),
        }

    @api.get("/metrics")
    def metrics():
        stages = engine.metrics.summary()
        return {
            "checkouts": stages.get("total_ms", {}).get("count", 0),
            "stages": stages,
        }

    app.include_router(public)
    app.include_router(api)
    return app


def serve(config: ApiConfig) -> None:
    """Run the API under uvicorn; blocks until interrupted."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
