"""Shared fixtures: deterministic providers, small catalogs, and the
session-scoped 10k index that the scale criteria reuse."""

from __future__ import annotations

import time

import numpy as np
import pytest

from skuscan.embedspace import LabelOracleEmbedder, random_unit_vectors
from skuscan.registry import SkuRegistry
from skuscan.vindex import HnswParams, Payload, VectorIndex

BIG_N = 10_000
BIG_DIM = 384
QUERY_N = 1_000
DATA_SEED = 42
QUERY_SEED = 99
INDEX_SEED = 0


@pytest.fixture(scope="session")
def big_index():
    """10,000 random unit vectors in one built index, plus timing and queries.

    Scale tests share this build. Mutating tests must register ONLY new
    records; recall measurement stays valid because both the graph search and
    the exact oracle see the same records.
    """
    vectors = random_unit_vectors(BIG_N, BIG_DIM, seed=DATA_SEED)
    queries = random_unit_vectors(QUERY_N, BIG_DIM, seed=QUERY_SEED)
    index = VectorIndex(dim=BIG_DIM, params=HnswParams(rng_seed=INDEX_SEED))
    t0 = time.perf_counter()
    for i, vec in enumerate(vectors):
        index.insert(vec, Payload(sku_id=f"ref-{i:05d}", name="", price_cents=0, category=""))
    build_seconds = time.perf_counter() - t0
    return {"vectors": vectors, "queries": queries, "index": index,
            "build_seconds": build_seconds}


@pytest.fixture()
def oracle_provider():
    return LabelOracleEmbedder(seed=5, noise_scale=0.1, dim=64)


@pytest.fixture()
def small_registry(oracle_provider):
    """Eight registered synthetic classes over a 64-d space."""
    index = VectorIndex(dim=64, params=HnswParams(rng_seed=0))
    registry = SkuRegistry(index)
    for cid in range(8):
        refs = [oracle_provider.sample(cid, draw) for draw in range(3)]
        registry.register_sku(
            sku_id=f"sku-{cid:05d}",
            name=f"product {cid}",
            price_cents=100 + cid,
            category="synthetic",
            references=refs,
        )
    return registry


def pytest_report_header(config):
    return f"scale fixtures: n={BIG_N} dim={BIG_DIM} queries={QUERY_N}"
