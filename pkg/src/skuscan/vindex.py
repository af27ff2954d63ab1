"""Payload-carrying vector index: exact top-k search plus an HNSW approximate index.

Vectors are stored unit-normalized as float32 rows of one contiguous matrix;
similarity is the dot product, which equals cosine for unit vectors. Exact
search is a full scan in float64 and acts as the ground-truth oracle for the
graph search. Removal is tombstone-based; the graph is compacted (rebuilt over
survivors) once 20% of records are deleted.

Snapshot layout (little-endian): magic ``ZBRD``, format version u16, dim u16,
metric tag u8 (0 = cosine), rng_seed u64, record count u64, then per record:
record_id u64, the vector as dim f32 values, four u32-length-prefixed UTF-8
strings (sku_id, name, category, reserved), price_cents u64; the file ends
with a CRC32 of all preceding bytes. The graph itself is not stored: loading
rebuilds it deterministically from the records and the seed.
"""

from __future__ import annotations

import heapq
import math
import random
import struct
import threading
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import SkuscanError
from .embedspace import DimMismatch, ZeroVector

SNAPSHOT_MAGIC = b"ZBRD"
SNAPSHOT_VERSION = 1
METRIC_COSINE = 0
COMPACT_DELETED_FRACTION = 0.2


class IndexError_(SkuscanError):
    """Base for vector-index failures."""


class SnapshotError(IndexError_):
    """Base for snapshot read/write failures."""


class IoFailure(SnapshotError):
    pass


class VersionMismatch(SnapshotError):
    """Unknown magic, version, or metric tag."""


class ChecksumMismatch(SnapshotError):
    """Trailing CRC32 does not match, or the file is truncated."""


@dataclass(frozen=True)
class Payload:
    """Catalog payload carried alongside one reference vector."""

    sku_id: str
    name: str
    price_cents: int
    category: str

    def __post_init__(self):
        if not self.sku_id:
            raise ValueError("sku_id must be non-empty")
        if self.price_cents < 0:
            raise ValueError(f"price_cents must be >= 0, got {self.price_cents}")


@dataclass(frozen=True)
class SearchHit:
    record_id: int
    score: float
    payload: Payload


@dataclass(frozen=True)
class HnswParams:
    """Graph construction/search parameters.

    M bounds out-degree on the upper layers; layer 0 admits 2M edges per node
    as usual for this graph family. Levels are drawn from the geometric
    distribution with multiplier 1/ln(M) using the seeded generator, so builds
    are reproducible for a fixed seed and insertion order.

    The default beam widths are tuned for high-dimensional embeddings with
    weak neighborhood structure: a wide query beam recovers recall that no
    affordable amount of extra construction effort buys, so the defaults pair
    a modest ef_construction with a large ef_search. On small catalogs the
    query beam simply covers the whole graph, which makes results exact.
    """

    M: int = 16
    ef_construction: int = 120
    ef_search: int = 640
    rng_seed: int = 0

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"M must be >= 2, got {self.M}")
        if self.ef_construction < self.M:
            raise ValueError("ef_construction must be >= M")
        if self.ef_search < 1:
            raise ValueError("ef_search must be >= 1")


class _RWLock:
    """Many readers or one writer; writers wait for readers to drain."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    def acquire_read(self):
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1

    def release_read(self):
        with self._cond:
            self._readers -= 1
            if self._readers == 0:
                self._cond.notify_all()

    def acquire_write(self):
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True

    def release_write(self):
        with self._cond:
            self._writer = False
            self._cond.notify_all()


class VectorIndex:
    """In-process vector index with exact and approximate cosine search."""

    def __init__(self, dim: int, params: HnswParams | None = None):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self.params = params or HnswParams()
        self._lock = _RWLock()
        self._vectors = np.zeros((0, dim), dtype=np.float32)
        self._vectors64: np.ndarray | None = None
        self._payloads: list[Payload | None] = []
        self._deleted = np.zeros(0, dtype=bool)
        self._n_live = 0
        # Layer 0 is the hot path: flat adjacency rows of capacity 2M plus a
        # fill count per node. Layers >= 1 hold few nodes and stay as lists.
        self._adj0 = np.zeros((0, 2 * self.params.M), dtype=np.int32)
        self._cnt0 = np.zeros(0, dtype=np.int32)
        self._levels = np.zeros(0, dtype=np.int32)
        self._upper: list[list[list[int]] | None] = []
        self._entry: int | None = None
        self._max_level = -1
        self._rng = random.Random(self.params.rng_seed)
        self._level_mult = 1.0 / math.log(self.params.M)
        self._rebuilds = 0

    # ------------------------------------------------------------------ size

    def __len__(self) -> int:
        return self._n_live

    @property
    def next_record_id(self) -> int:
        return len(self._payloads)

    def records(self):
        """Yield (record_id, vector copy, payload) for all live records."""
        for rid, payload in enumerate(self._payloads):
            if payload is not None and not self._deleted[rid]:
                yield rid, self._vectors[rid].copy(), payload

    def get(self, record_id: int) -> tuple[np.ndarray, Payload] | None:
        if 0 <= record_id < len(self._payloads):
            payload = self._payloads[record_id]
            if payload is not None and not self._deleted[record_id]:
                return self._vectors[record_id].copy(), payload
        return None

    # ---------------------------------------------------------------- insert

    def _prepare(self, vector) -> np.ndarray:
        vec = np.asarray(vector, dtype=np.float64).reshape(-1)
        if vec.shape[0] != self.dim:
            raise DimMismatch(f"vector dim {vec.shape[0]} != index dim {self.dim}")
        if not np.all(np.isfinite(vec)):
            raise ZeroVector("vector contains non-finite values")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ZeroVector("cannot index the zero vector")
        return (vec / norm).astype(np.float32)

    def _grow(self, needed: int):
        cap = self._vectors.shape[0]
        if needed <= cap:
            return
        new_cap = max(needed, 16, cap * 2)
        grown = np.zeros((new_cap, self.dim), dtype=np.float32)
        grown[:cap] = self._vectors
        self._vectors = grown
        mask = np.zeros(new_cap, dtype=bool)
        mask[:cap] = self._deleted
        self._deleted = mask
        adj = np.zeros((new_cap, self._adj0.shape[1]), dtype=np.int32)
        adj[:cap] = self._adj0
        self._adj0 = adj
        cnt = np.zeros(new_cap, dtype=np.int32)
        cnt[:cap] = self._cnt0
        self._cnt0 = cnt
        levels = np.full(new_cap, -1, dtype=np.int32)
        levels[:cap] = self._levels
        self._levels = levels

    def insert(self, vector, payload: Payload) -> int:
        """Normalize and store a vector; returns the assigned record id."""
        vec = self._prepare(vector)
        self._lock.acquire_write()
        try:
            rid = len(self._payloads)
            self._grow(rid + 1)
            self._vectors[rid] = vec
            self._vectors64 = None
            self._payloads.append(payload)
            self._n_live += 1
            self._upper.append(None)
            self._graph_insert(rid, self._rng)
            return rid
        finally:
            self._lock.release_write()

    def _sample_level(self, rng: random.Random) -> int:
        return int(-math.log(1.0 - rng.random()) * self._level_mult)

    def _neighbor_row(self, rid: int, layer: int) -> np.ndarray:
        if layer == 0:
            return self._adj0[rid, : self._cnt0[rid]]
        upper = self._upper[rid]
        return np.asarray(upper[layer - 1], dtype=np.int32)

    def _graph_insert(self, rid: int, rng: random.Random):
        level = self._sample_level(rng)
        self._levels[rid] = level
        self._upper[rid] = [[] for _ in range(level)]

        if self._entry is None:
            self._entry = rid
            self._max_level = level
            return

        vec = self._vectors[rid]
        m = self.params.M
        cur = self._entry
        cur_sim = float(self._vectors[cur] @ vec)
        for layer in range(self._max_level, level, -1):
            cur, cur_sim = self._greedy_closest(vec, cur, cur_sim, layer)

        entry_points = [(cur_sim, cur)]
        for layer in range(min(level, self._max_level), -1, -1):
            m_max = 2 * m if layer == 0 else m
            found = self._search_layer(
                vec, entry_points, self.params.ef_construction, layer, include_deleted=True
            )
            found.sort(key=lambda pair: (-pair[0], pair[1]))
            selected = self._select_neighbors(vec, found, m)
            if layer == 0:
                ids = [nid for _, nid in selected]
                self._adj0[rid, : len(ids)] = ids
                self._cnt0[rid] = len(ids)
            else:
                self._upper[rid][layer - 1] = [nid for _, nid in selected]
            for sim, nid in selected:
                self._add_back_edge(nid, rid, layer, m_max)
            entry_points = found

        if level > self._max_level:
            self._entry = rid
            self._max_level = level

    def _add_back_edge(self, nid: int, rid: int, layer: int, m_max: int):
        if layer == 0:
            cnt = int(self._cnt0[nid])
            if cnt < m_max:
                self._adj0[nid, cnt] = rid
                self._cnt0[nid] = cnt + 1
                return
            merged = np.empty(cnt + 1, dtype=np.int32)
            merged[:cnt] = self._adj0[nid, :cnt]
            merged[cnt] = rid
            kept = self._shrink_neighbors(nid, merged, m_max)
            self._adj0[nid, : len(kept)] = kept
            self._cnt0[nid] = len(kept)
        else:
            nbrs = self._upper[nid][layer - 1]
            nbrs.append(rid)
            if len(nbrs) > m_max:
                kept = self._shrink_neighbors(nid, np.asarray(nbrs, dtype=np.int32), m_max)
                self._upper[nid][layer - 1] = kept

    def _shrink_neighbors(self, nid: int, merged: np.ndarray, m_max: int) -> list[int]:
        base = self._vectors[nid]
        sims = self._vectors[merged] @ base
        ranked = sorted(zip(sims.tolist(), merged.tolist()), key=lambda p: (-p[0], p[1]))
        return [r for _, r in self._select_neighbors(base, ranked, m_max)]

    def _greedy_closest(
        self, vec: np.ndarray, start: int, start_sim: float, layer: int
    ) -> tuple[int, float]:
        cur, cur_sim = start, start_sim
        vectors = self._vectors
        while True:
            nbrs = self._neighbor_row(cur, layer)
            if nbrs.size == 0:
                return cur, cur_sim
            sims = vectors[nbrs] @ vec
            best = int(np.argmax(sims))
            if sims[best] <= cur_sim:
                return cur, cur_sim
            cur = int(nbrs[best])
            cur_sim = float(sims[best])

    def _search_layer(
        self,
        vec: np.ndarray,
        entry_points: list[tuple[float, int]],
        ef: int,
        layer: int,
        include_deleted: bool,
    ) -> list[tuple[float, int]]:
        """Beam search one layer; returns up to ef (sim, id) pairs, unordered.

        Results are kept in a bounded min-heap keyed (sim, -id) so that on a
        tied worst score the larger record id is evicted first.
        """
        vectors = self._vectors
        adj0 = self._adj0
        cnt0 = self._cnt0
        deleted = self._deleted
        any_deleted = bool(deleted[: len(self._payloads)].any())
        visited = np.zeros(len(self._payloads), dtype=bool)
        push, pop = heapq.heappush, heapq.heappop

        candidates = [(-sim, rid) for sim, rid in entry_points]
        heapq.heapify(candidates)
        results = []
        for sim, rid in entry_points:
            visited[rid] = True
            if include_deleted or not deleted[rid]:
                results.append((sim, -rid))
        heapq.heapify(results)
        worst = results[0][0] if len(results) >= ef else -math.inf

        while candidates:
            neg_sim, cur = pop(candidates)
            if -neg_sim < worst:
                break
            if layer == 0:
                row = adj0[cur, : cnt0[cur]]
            else:
                row = np.asarray(self._upper[cur][layer - 1], dtype=np.int32)
            fresh = row[~visited[row]]
            if fresh.size == 0:
                continue
            visited[fresh] = True
            sims = vectors[fresh] @ vec
            if len(results) >= ef:
                better = sims > worst
                fresh = fresh[better]
                sims = sims[better]
            dropped = deleted[fresh] if any_deleted else None
            for pos, (n, s) in enumerate(zip(fresh.tolist(), sims.tolist())):
                push(candidates, (-s, n))
                if include_deleted or dropped is None or not dropped[pos]:
                    push(results, (s, -n))
                    if len(results) > ef:
                        pop(results)
                        worst = results[0][0]
            if len(results) >= ef and worst == -math.inf:
                worst = results[0][0]
        return [(sim, -neg_rid) for sim, neg_rid in results]

    def _select_neighbors(
        self, vec: np.ndarray, candidates: list[tuple[float, int]], m: int
    ) -> list[tuple[float, int]]:
        """Diversity-aware pruning: keep a candidate only if it is closer to the
        query than to every neighbor kept so far (sims: closer = larger)."""
        vectors = self._vectors
        selected: list[tuple[float, int]] = []
        kept_ids: list[int] = []
        for sim, rid in candidates:  # expected sorted by sim descending
            if len(selected) >= m:
                break
            if kept_ids:
                to_kept = vectors[kept_ids] @ vectors[rid]
                if float(np.max(to_kept)) > sim:
                    continue
            selected.append((sim, rid))
            kept_ids.append(rid)
        return selected

    # ---------------------------------------------------------------- search

    def search_exact(self, query, k: int) -> list[SearchHit]:
        """True top-k by cosine similarity; ties break to the smaller record id."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        vec = self._prepare(query).astype(np.float64)
        self._lock.acquire_read()
        try:
            n = len(self._payloads)
            if n == 0 or self._n_live == 0:
                return []
            if self._vectors64 is None or self._vectors64.shape[0] != n:
                # Rebuilding under a read lock is safe: concurrent readers
                # compute the same value and assignment is atomic.
                self._vectors64 = self._vectors[:n].astype(np.float64)
            # einsum keeps each row's reduction independent of the matrix
            # height; BLAS matvec tail kernels round differently as rows are
            # appended, which would break exact replay on a grown catalog.
            sims = np.einsum("ij,j->i", self._vectors64, vec)
            sims[self._deleted[:n]] = -np.inf
            order = np.lexsort((np.arange(n), -sims))
            hits = []
            for rid in order[: min(k, self._n_live)]:
                rid = int(rid)
                if not np.isfinite(sims[rid]):
                    break
                hits.append(
                    SearchHit(rid, float(np.clip(sims[rid], -1.0, 1.0)), self._payloads[rid])
                )
            return hits
        finally:
            self._lock.release_read()

    def search_ann(self, query, k: int, ef_search: int | None = None) -> list[SearchHit]:
        """Approximate top-k via the graph; deterministic for a fixed build."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        vec = self._prepare(query)
        ef = max(ef_search or self.params.ef_search, k)
        # A beam at least as wide as the live set visits everything; the
        # vectorized full scan returns the same ranking in a fraction of the
        # time, so small catalogs get exact answers by construction.
        if self._n_live <= ef:
            return self.search_exact(query, k)
        self._lock.acquire_read()
        try:
            if self._entry is None or self._n_live == 0:
                return []
            cur = self._entry
            cur_sim = float(self._vectors[cur] @ vec)
            for layer in range(self._max_level, 0, -1):
                cur, cur_sim = self._greedy_closest(vec, cur, cur_sim, layer)
            found = self._search_layer(vec, [(cur_sim, cur)], ef, 0, include_deleted=False)
            found.sort(key=lambda pair: (-pair[0], pair[1]))
            return [
                SearchHit(rid, float(np.clip(sim, -1.0, 1.0)), self._payloads[rid])
                for sim, rid in found[:k]
            ]
        finally:
            self._lock.release_read()

    # ---------------------------------------------------------------- update

    def update_payload(self, record_id: int, payload: Payload) -> bool:
        """Replace a live record's payload; vector and graph are untouched."""
        self._lock.acquire_write()
        try:
            if not (0 <= record_id < len(self._payloads)):
                return False
            if self._payloads[record_id] is None or self._deleted[record_id]:
                return False
            self._payloads[record_id] = payload
            return True
        finally:
            self._lock.release_write()

    # ---------------------------------------------------------------- remove

    def remove(self, record_id: int) -> bool:
        """Tombstone a record; False when the id is absent or already removed."""
        self._lock.acquire_write()
        try:
            if not (0 <= record_id < len(self._payloads)):
                return False
            if self._payloads[record_id] is None or self._deleted[record_id]:
                return False
            self._deleted[record_id] = True
            self._n_live -= 1
            if self._entry == record_id:
                self._reassign_entry()
            total = sum(1 for p in self._payloads if p is not None)
            if total and (total - self._n_live) / total > COMPACT_DELETED_FRACTION:
                self._rebuild_graph()
            return True
        finally:
            self._lock.release_write()

    def _reassign_entry(self):
        # Prefer the highest-level live node so descent still starts at the top.
        n = len(self._payloads)
        levels = self._levels[:n].astype(np.int64)
        dead = self._deleted[:n] | np.fromiter(
            (p is None for p in self._payloads), dtype=bool, count=n
        )
        levels[dead] = -1
        best = int(np.argmax(levels)) if n else 0
        if n == 0 or levels[best] < 0:
            self._entry = None
            self._max_level = -1
        else:
            self._entry = best
            self._max_level = int(levels[best])

    def _rebuild_graph(self):
        """Drop tombstoned nodes and reinsert survivors in record-id order."""
        self._rebuilds += 1
        # Distinct deterministic stream per rebuild; tuple seeding is
        # hash-based and deprecated, so combine arithmetically.
        rng = random.Random(self.params.rng_seed * 1_000_003 + self._rebuilds)
        self._entry = None
        self._max_level = -1
        for rid, payload in enumerate(self._payloads):
            if payload is not None and self._deleted[rid]:
                self._payloads[rid] = None
                self._upper[rid] = None
        self._cnt0[:] = 0
        self._levels[:] = -1
        for rid, payload in enumerate(self._payloads):
            if payload is not None:
                self._upper[rid] = None
                self._graph_insert(rid, rng)

    # ------------------------------------------------------------- snapshots

    def save_snapshot(self, path):
        """Write the versioned binary snapshot of all live records."""
        self._lock.acquire_read()
        try:
            blob = self._serialize()
        finally:
            self._lock.release_read()
        try:
            with open(path, "wb") as fh:
                fh.write(blob)
        except OSError as exc:
            raise IoFailure(f"cannot write snapshot {path}: {exc}") from exc

    def _serialize(self) -> bytes:
        parts = [
            SNAPSHOT_MAGIC,
            struct.pack("<HHB", SNAPSHOT_VERSION, self.dim, METRIC_COSINE),
            struct.pack("<QQ", self.params.rng_seed, self._n_live),
        ]
        for rid, vec, payload in self.records():
            parts.append(struct.pack("<Q", rid))
            parts.append(vec.astype("<f4").tobytes())
            for text in (payload.sku_id, payload.name, payload.category, ""):
                raw = text.encode("utf-8")
                parts.append(struct.pack("<I", len(raw)))
                parts.append(raw)
            parts.append(struct.pack("<Q", payload.price_cents))
        body = b"".join(parts)
        return body + struct.pack("<I", zlib.crc32(body))

    @classmethod
    def load_snapshot(cls, path, params: HnswParams | None = None) -> VectorIndex:
        """Read a snapshot and rebuild the graph from the records and seed."""
        try:
            with open(path, "rb") as fh:
                blob = fh.read()
        except OSError as exc:
            raise IoFailure(f"cannot read snapshot {path}: {exc}") from exc
        if len(blob) < 4 + 5 + 16 + 4:
            raise ChecksumMismatch("snapshot truncated")
        body, crc_raw = blob[:-4], blob[-4:]
        if struct.unpack("<I", crc_raw)[0] != zlib.crc32(body):
            raise ChecksumMismatch("snapshot CRC32 mismatch")
        if body[:4] != SNAPSHOT_MAGIC:
            raise VersionMismatch(f"bad magic {body[:4]!r}")
        version, dim, metric = struct.unpack_from("<HHB", body, 4)
        if version != SNAPSHOT_VERSION:
            raise VersionMismatch(f"unsupported snapshot version {version}")
        if metric != METRIC_COSINE:
            raise VersionMismatch(f"unsupported metric tag {metric}")
        seed, count = struct.unpack_from("<QQ", body, 9)
        offset = 25

        if params is None:
            params = HnswParams(rng_seed=seed)
        index = cls(dim, params)
        records: list[tuple[int, np.ndarray, Payload]] = []
        try:
            for _ in range(count):
                (rid,) = struct.unpack_from("<Q", body, offset)
                offset += 8
                vec = np.frombuffer(body, dtype="<f4", count=dim, offset=offset).copy()
                offset += 4 * dim
                strings = []
                for _ in range(4):
                    (length,) = struct.unpack_from("<I", body, offset)
                    offset += 4
                    strings.append(body[offset : offset + length].decode("utf-8"))
                    offset += length
                (price,) = struct.unpack_from("<Q", body, offset)
                offset += 8
                records.append(
                    (rid, vec, Payload(strings[0], strings[1], price, strings[2]))
                )
        except (struct.error, UnicodeDecodeError) as exc:
            raise ChecksumMismatch(f"snapshot record stream corrupt: {exc}") from exc

        if records:
            max_id = max(rid for rid, _, _ in records)
            index._grow(max_id + 1)
            index._payloads = [None] * (max_id + 1)
            index._upper = [None] * (max_id + 1)
            index._deleted[: max_id + 1] = True
            for rid, vec, payload in records:
                index._vectors[rid] = vec
                index._payloads[rid] = payload
                index._deleted[rid] = False
            index._n_live = len(records)
            rng = random.Random(seed)
            for rid, _, _ in records:
                index._graph_insert(rid, rng)
        return index
