"""SKU catalog with open-set classification and a human-review flag queue.

Each SKU is stored in the vector index as a single prototype: the normalized
mean of its reference embeddings. Raw references are retained so the prototype
can be recomputed when a flag is folded into an existing SKU. Classification
retrieves top-k prototypes and applies a similarity threshold: at or above tau
the best SKU is a Match, below it the query is Unknown and may be flagged for
an operator. Registering a SKU writes exactly one new index record and touches
nothing else, so previously registered SKUs keep their exact scores.

The catalog persists as a versioned JSON document (references included with
full round-trip precision); the vector index persists separately as its own
snapshot. All mutations serialize through one lock; reads take it briefly to
copy references out.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .embedspace import as_embedding, centroid
from .errors import SkuscanError
from .vindex import Payload, VectorIndex

CATALOG_VERSION = 1
DEFAULT_TAU = 0.75
DEFAULT_K = 5

FLAG_OPEN = "open"
FLAG_RESOLVED = "resolved"
FLAG_DISMISSED = "dismissed"


class RegistryError(SkuscanError):
    """Base for catalog failures."""


class DuplicateSku(RegistryError):
    pass


class UnknownSku(RegistryError):
    pass


class EmptyReferences(RegistryError):
    pass


class UnknownFlagId(RegistryError):
    pass


class FlagNotOpen(RegistryError):
    pass


@dataclass(frozen=True)
class ClassifyParams:
    """Open-set decision knobs: retrieval width k and the accept threshold."""

    tau: float = DEFAULT_TAU
    k: int = DEFAULT_K

    def __post_init__(self):
        if not -1.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (-1, 1), got {self.tau}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class Match:
    sku_id: str
    name: str
    price_cents: int
    score: float


@dataclass(frozen=True)
class Unknown:
    best_sku_id: str | None = None
    best_score: float | None = None


Decision = Match | Unknown


@dataclass
class SkuRecord:
    """One catalog entry; centroid is the unit prototype stored in the index."""

    sku_id: str
    name: str
    price_cents: int
    category: str
    centroid: np.ndarray
    reference_count: int
    registered_at: float
    record_id: int = field(repr=False, default=-1)


@dataclass
class UnknownFlag:
    """A queued unrecognized detection awaiting operator action."""

    flag_id: str
    embedding: np.ndarray
    patch_ref: str
    best_sku_id: str | None
    best_score: float | None
    created_at: float
    status: str = FLAG_OPEN


class SkuRegistry:
    """Catalog of prototypes over a VectorIndex plus the unknown-flag queue."""

    def __init__(self, index: VectorIndex):
        self.index = index
        self._lock = threading.RLock()
        self._skus: dict[str, SkuRecord] = {}
        self._references: dict[str, list[np.ndarray]] = {}
        self._flags: dict[str, UnknownFlag] = {}
        self._flag_seq = 0

    # ------------------------------------------------------------- registration

    def register_sku(
        self,
        sku_id: str,
        name: str,
        price_cents: int,
        category: str,
        references: list,
    ) -> SkuRecord:
        """Insert one prototype record; every other record is left untouched."""
        if not references:
            raise EmptyReferences(f"sku {sku_id!r} needs at least one reference")
        refs = [as_embedding(r, self.index.dim) for r in references]
        proto = centroid(refs)
        with self._lock:
            if sku_id in self._skus:
                raise DuplicateSku(f"sku {sku_id!r} already registered")
            record_id = self.index.insert(
                proto, Payload(sku_id=sku_id, name=name, price_cents=price_cents, category=category)
            )
            stored, _ = self.index.get(record_id)
            record = SkuRecord(
                sku_id=sku_id,
                name=name,
                price_cents=price_cents,
                category=category,
                centroid=stored,
                reference_count=len(refs),
                registered_at=time.time(),
                record_id=record_id,
            )
            self._skus[sku_id] = record
            self._references[sku_id] = refs
            return record

    # ------------------------------------------------------------ classification

    def classify(self, query, params: ClassifyParams | None = None, *, exact: bool = False) -> Decision:
        """Top-k retrieve and threshold; exact=True uses the full-scan oracle path.

        Score ties between SKUs break to the lexicographically smallest sku_id.
        """
        params = params or ClassifyParams()
        vec = as_embedding(query, self.index.dim)
        search = self.index.search_exact if exact else self.index.search_ann
        hits = search(vec, params.k)
        if not hits:
            return Unknown()
        best = hits[0]
        for hit in hits[1:]:
            if hit.score == best.score and hit.payload.sku_id < best.payload.sku_id:
                best = hit
        if best.score >= params.tau:
            with self._lock:
                record = self._skus.get(best.payload.sku_id)
            if record is not None:
                return Match(record.sku_id, record.name, record.price_cents, best.score)
            return Match(
                best.payload.sku_id, best.payload.name, best.payload.price_cents, best.score
            )
        return Unknown(best_sku_id=best.payload.sku_id, best_score=best.score)

    def best_candidate(self, query, k: int = DEFAULT_K, *, exact: bool = False):
        """(sku_id, score) of the best hit regardless of threshold, or None."""
        vec = as_embedding(query, self.index.dim)
        search = self.index.search_exact if exact else self.index.search_ann
        hits = search(vec, k)
        if not hits:
            return None
        best = hits[0]
        for hit in hits[1:]:
            if hit.score == best.score and hit.payload.sku_id < best.payload.sku_id:
                best = hit
        return best.payload.sku_id, best.score

    # -------------------------------------------------------------------- flags

    def create_flag(self, embedding, patch_ref: str, best: tuple[str, float] | None = None) -> UnknownFlag:
        """Enqueue an open flag; ids are sequential so runs replay identically."""
        vec = as_embedding(embedding, self.index.dim)
        with self._lock:
            self._flag_seq += 1
            flag = UnknownFlag(
                flag_id=f"flag-{self._flag_seq:06d}",
                embedding=vec.astype(np.float32),
                patch_ref=patch_ref,
                best_sku_id=best[0] if best else None,
                best_score=best[1] if best else None,
                created_at=time.time(),
            )
            self._flags[flag.flag_id] = flag
            return flag

    def resolve_flag(
        self,
        flag_id: str,
        sku_id: str,
        name: str,
        price_cents: int,
        category: str,
        extra_references: list | None = None,
    ) -> SkuRecord:
        """Fold a flag into the catalog: register a new SKU from its embedding,
        or append the embedding to an existing SKU and recompute its prototype."""
        with self._lock:
            flag = self._flags.get(flag_id)
            if flag is None:
                raise UnknownFlagId(f"no flag {flag_id!r}")
            if flag.status != FLAG_OPEN:
                raise FlagNotOpen(f"flag {flag_id!r} is {flag.status}")
            extras = [as_embedding(r, self.index.dim) for r in (extra_references or [])]
            if sku_id in self._skus:
                record = self._append_references(sku_id, [flag.embedding, *extras])
            else:
                record = self.register_sku(
                    sku_id, name, price_cents, category, [flag.embedding, *extras]
                )
            flag.status = FLAG_RESOLVED
            return record

    def dismiss_flag(self, flag_id: str) -> UnknownFlag:
        with self._lock:
            flag = self._flags.get(flag_id)
            if flag is None:
                raise UnknownFlagId(f"no flag {flag_id!r}")
            if flag.status != FLAG_OPEN:
                raise FlagNotOpen(f"flag {flag_id!r} is {flag.status}")
            flag.status = FLAG_DISMISSED
            return flag

    def _append_references(self, sku_id: str, new_refs: list[np.ndarray]) -> SkuRecord:
        record = self._skus[sku_id]
        refs = self._references[sku_id] + new_refs
        proto = centroid(refs)
        self.index.remove(record.record_id)
        record.record_id = self.index.insert(
            proto,
            Payload(
                sku_id=sku_id,
                name=record.name,
                price_cents=record.price_cents,
                category=record.category,
            ),
        )
        record.centroid, _ = self.index.get(record.record_id)
        record.reference_count = len(refs)
        self._references[sku_id] = refs
        return record

    def list_flags(self, status: str | None = None) -> list[UnknownFlag]:
        with self._lock:
            flags = list(self._flags.values())
        if status is not None:
            flags = [f for f in flags if f.status == status]
        return sorted(flags, key=lambda f: f.flag_id)

    def get_flag(self, flag_id: str) -> UnknownFlag:
        with self._lock:
            flag = self._flags.get(flag_id)
        if flag is None:
            raise UnknownFlagId(f"no flag {flag_id!r}")
        return flag

    # --------------------------------------------------------------------- CRUD

    def list_skus(self) -> list[SkuRecord]:
        with self._lock:
            return sorted(self._skus.values(), key=lambda r: r.sku_id)

    def has_sku(self, sku_id: str) -> bool:
        with self._lock:
            return sku_id in self._skus

    def get_sku(self, sku_id: str) -> SkuRecord:
        with self._lock:
            record = self._skus.get(sku_id)
        if record is None:
            raise UnknownSku(f"no sku {sku_id!r}")
        return record

    def remove_sku(self, sku_id: str) -> None:
        with self._lock:
            record = self._skus.pop(sku_id, None)
            if record is None:
                raise UnknownSku(f"no sku {sku_id!r}")
            self._references.pop(sku_id, None)
            self.index.remove(record.record_id)

    def update_price(self, sku_id: str, price_cents: int) -> SkuRecord:
        if price_cents < 0:
            raise ValueError(f"price_cents must be >= 0, got {price_cents}")
        with self._lock:
            record = self._skus.get(sku_id)
            if record is None:
                raise UnknownSku(f"no sku {sku_id!r}")
            record.price_cents = price_cents
            self.index.update_payload(
                record.record_id,
                Payload(
                    sku_id=sku_id,
                    name=record.name,
                    price_cents=price_cents,
                    category=record.category,
                ),
            )
            return record

    def references(self, sku_id: str) -> list[np.ndarray]:
        with self._lock:
            refs = self._references.get(sku_id)
            if refs is None:
                raise UnknownSku(f"no sku {sku_id!r}")
            return [r.copy() for r in refs]

    def __len__(self) -> int:
        with self._lock:
            return len(self._skus)

    # -------------------------------------------------------------- persistence

    def to_json(self, tau_default: float = DEFAULT_TAU) -> str:
        """Versioned catalog document; floats serialize with repr precision."""
        with self._lock:
            skus = [
                {
                    "sku_id": r.sku_id,
                    "name": r.name,
                    "price_cents": r.price_cents,
                    "category": r.category,
                    "registered_at": r.registered_at,
                    "references": [
                        [float(x) for x in ref] for ref in self._references[r.sku_id]
                    ],
                }
                for r in sorted(self._skus.values(), key=lambda r: r.sku_id)
            ]
            flags = [
                {
                    "flag_id": f.flag_id,
                    "embedding": [float(x) for x in f.embedding],
                    "patch_ref": f.patch_ref,
                    "best_sku_id": f.best_sku_id,
                    "best_score": f.best_score,
                    "created_at": f.created_at,
                    "status": f.status,
                }
                for f in sorted(self._flags.values(), key=lambda f: f.flag_id)
            ]
        return json.dumps(
            {"version": CATALOG_VERSION, "tau_default": tau_default, "skus": skus, "flags": flags}
        )

    @classmethod
    def from_json(cls, text: str, index: VectorIndex) -> "SkuRegistry":
        """Attach a catalog document to its companion loaded index.

        The index must already hold exactly one record per listed SKU (the
        snapshot written alongside the document); records keep their original
        ids so search tie-breaking is identical after a reload.
        """
        doc = json.loads(text)
        if doc.get("version") != CATALOG_VERSION:
            raise RegistryError(f"unsupported catalog version {doc.get('version')!r}")
        by_sku: dict[str, tuple[int, np.ndarray]] = {}
        for record_id, vector, payload in index.records():
            if payload.sku_id in by_sku:
                raise RegistryError(f"index holds duplicate records for {payload.sku_id!r}")
            by_sku[payload.sku_id] = (record_id, vector)

        registry = cls(index)
        for entry in doc["skus"]:
            sku_id = entry["sku_id"]
            if sku_id not in by_sku:
                raise RegistryError(f"catalog lists {sku_id!r} but the index has no record")
            record_id, vector = by_sku.pop(sku_id)
            refs = [np.asarray(ref, dtype=np.float32) for ref in entry["references"]]
            registry._skus[sku_id] = SkuRecord(
                sku_id=sku_id,
                name=entry["name"],
                price_cents=entry["price_cents"],
                category=entry["category"],
                centroid=vector,
                reference_count=len(refs),
                registered_at=entry["registered_at"],
                record_id=record_id,
            )
            registry._references[sku_id] = refs
        if by_sku:
            extras = sorted(by_sku)
            raise RegistryError(f"index holds records not in the catalog: {extras[:5]}")

        for entry in doc["flags"]:
            flag = UnknownFlag(
                flag_id=entry["flag_id"],
                embedding=np.asarray(entry["embedding"], dtype=np.float32),
                patch_ref=entry["patch_ref"],
                best_sku_id=entry["best_sku_id"],
                best_score=entry["best_score"],
                created_at=entry["created_at"],
                status=entry["status"],
            )
            registry._flags[flag.flag_id] = flag
            seq = int(flag.flag_id.rsplit("-", 1)[-1])
            registry._flag_seq = max(registry._flag_seq, seq)
        return registry
