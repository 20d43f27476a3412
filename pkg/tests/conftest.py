from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from expmem.embedding import LocalEmbedder
from expmem.suite import build_reference_store

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def embedder() -> LocalEmbedder:
    return LocalEmbedder()


@pytest.fixture(scope="session")
def reference_store(embedder):
    """The 100-record store: four written-back episodes interleaved with fillers."""
    return build_reference_store(embedder, seed=0)
