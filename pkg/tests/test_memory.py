from __future__ import annotations

import math
import random
from collections import Counter
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expmem.errors import InvalidInput, StoreParseError
from expmem.memory import MemoryStore, ScenarioKey, cosine_similarity

T0 = datetime(2025, 3, 1, 12, 0, tzinfo=timezone.utc)


def _key(i: int) -> ScenarioKey:
    return ScenarioKey(f"task {i}", f"scene {i}")


def _random_store(rng: random.Random, n: int, d: int) -> MemoryStore:
    store = MemoryStore()
    for i in range(n):
        vec = [rng.gauss(0, 1) for _ in range(d)]
        if not any(vec):
            vec[0] = 1.0
        store.append(_key(i), f"summary {i}", vec, created_at=T0)
    return store


def brute_force_top_k(store: MemoryStore, q, k: int) -> list[int]:
    scored = []
    for r in store.retrieve_all():
        a = np.asarray(r.embedding)
        b = np.asarray(q, dtype=float)
        scored.append((-(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b)), r.id))
    return [rid for _, rid in sorted(scored)[:k]]


# cosine_similarity


def test_cosine_examples():
    assert cosine_similarity((1, 0), (1, 0)) == 1.0
    assert cosine_similarity((1, 0), (0, 1)) == 0.0
    # 32 / (sqrt(14) * sqrt(77))
    assert cosine_similarity((1, 2, 3), (4, 5, 6)) == pytest.approx(0.974631846, abs=1e-9)


def test_cosine_rejects_bad_input():
    with pytest.raises(InvalidInput):
        cosine_similarity((1, 2), (1, 2, 3))
    with pytest.raises(InvalidInput):
        cosine_similarity((0, 0), (1, 0))


vectors = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=32).filter(
    lambda v: math.fsum(x * x for x in v) > 1e-6
)


@given(vectors)
def test_cosine_self_similarity(v):
    assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-9)


@given(st.data())
def test_cosine_range_and_symmetry(data):
    a = data.draw(vectors)
    b = data.draw(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=len(a), max_size=len(a)).filter(
        lambda v: math.fsum(x * x for x in v) > 1e-6
    ))
    s = cosine_similarity(a, b)
    assert -1.0 <= s <= 1.0
    assert s == pytest.approx(cosine_similarity(b, a), abs=1e-12)


# append


def test_append_grows_and_ids_distinct():
    store = MemoryStore()
    ids = [store.append(_key(i), "s", [1.0, float(i)]) for i in range(100)]
    assert len(store) == 100
    assert len(set(ids)) == 100
    assert ids == sorted(ids)
    assert store.get(ids[42]).key == _key(42)


def test_append_rejects_dimension_mismatch_and_zero():
    store = MemoryStore()
    store.append(_key(0), "s", [1.0, 0.0])
    with pytest.raises(InvalidInput):
        store.append(_key(1), "s", [1.0, 0.0, 0.0])
    with pytest.raises(InvalidInput):
        store.append(_key(1), "s", [0.0, 0.0])


def test_append_does_not_mutate_prior_records():
    store = MemoryStore()
    store.append(_key(0), "first", [1.0, 2.0])
    before = store.retrieve_all()
    store.append(_key(1), "second", [3.0, 4.0])
    assert store.retrieve_all()[:1] == before


def test_scenario_key_requires_instruction():
    with pytest.raises(InvalidInput):
        ScenarioKey("   ", "scene")
    assert ScenarioKey("a", "b").key_text() == ScenarioKey("a", "b").key_text()


# retrieve_top_k


def test_top_k_single_record():
    store = MemoryStore()
    store.append(_key(0), "only", [1.0, 1.0])
    [hit] = store.retrieve_top_k([-1.0, 0.5], 5)
    assert hit.record.id == 0


def test_top_k_exhaustion_sorted():
    store = _random_store(random.Random(1), 12, 6)
    q = [0.3, -1, 2, 0, 1, 0.5]
    hits = store.retrieve_top_k(q, 12)
    assert [h.record.id for h in hits] == brute_force_top_k(store, q, 12)
    assert all(a.similarity >= b.similarity for a, b in zip(hits, hits[1:]))


def test_top_k_matches_brute_force_100_records():
    rng = random.Random(3)
    store = _random_store(rng, 100, 16)
    q = [rng.gauss(0, 1) for _ in range(16)]
    assert [h.record.id for h in store.retrieve_top_k(q, 5)] == brute_force_top_k(store, q, 5)


def test_top_k_ties_prefer_older():
    store = MemoryStore()
    for i in range(4):
        store.append(_key(i), "dup", [1.0, 0.0])
    assert [h.record.id for h in store.retrieve_top_k([2.0, 0.0], 3)] == [0, 1, 2]


def test_top_k_errors():
    store = _random_store(random.Random(0), 3, 4)
    with pytest.raises(InvalidInput):
        store.retrieve_top_k([1.0, 0.0], 1)
    with pytest.raises(InvalidInput):
        store.retrieve_top_k([1.0, 0.0, 0.0, 0.0], 0)
    assert MemoryStore().retrieve_top_k([1.0], 3) == []


@given(st.integers(0, 2**32 - 1), st.integers(1, 256), st.integers(1, 64), st.integers(1, 300))
def test_top_k_oracle_property(seed, n, d, k):
    rng = random.Random(seed)
    store = _random_store(rng, n, d)
    q = [rng.gauss(0, 1) for _ in range(d)]
    hits = store.retrieve_top_k(q, k)
    assert [h.record.id for h in hits] == brute_force_top_k(store, q, k)
    for h in hits:
        assert h.similarity == pytest.approx(cosine_similarity(h.record.embedding, q), abs=1e-9)


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_top_k_scale_invariant(seed, factor):
    rng = random.Random(seed)
    store = _random_store(rng, 40, 8)
    q = [rng.gauss(0, 1) for _ in range(8)]
    base = [h.record.id for h in store.retrieve_top_k(q, 10)]
    scaled = [h.record.id for h in store.retrieve_top_k([x * factor for x in q], 10)]
    assert base == scaled


def test_self_similarity_in_store():
    store = _random_store(random.Random(9), 30, 12)
    for r in store:
        top = store.retrieve_top_k(r.embedding, 1)[0]
        assert top.similarity == pytest.approx(1.0, abs=1e-9)


# retrieve_random_k


def test_random_k_deterministic_and_distinct():
    store = _random_store(random.Random(0), 20, 4)
    a = store.retrieve_random_k(5, seed=11)
    assert a == store.retrieve_random_k(5, seed=11)
    assert len({r.id for r in a}) == 5


def test_random_k_exhausts_small_store():
    store = _random_store(random.Random(0), 3, 4)
    assert store.retrieve_random_k(5, seed=0) == store.retrieve_all()


def test_random_k_uniform():
    store = _random_store(random.Random(0), 10, 4)
    counts = Counter(store.retrieve_random_k(1, seed=s)[0].id for s in range(1000))
    assert set(counts) == set(range(10))
    for c in counts.values():
        assert abs(c / 1000 - 0.1) <= 0.05


# retrieve_all


def test_retrieve_all_order():
    assert MemoryStore().retrieve_all() == []
    store = _random_store(random.Random(0), 3, 4)
    assert [r.id for r in store.retrieve_all()] == [0, 1, 2]
    everything = {h.record.id for h in store.retrieve_top_k([1, 0, 0, 0], len(store))}
    assert everything == {r.id for r in store.retrieve_all()}


# persistence


def test_round_trip_empty(tmp_path):
    path = tmp_path / "empty.jsonl"
    MemoryStore().save(path)
    assert len(MemoryStore.load(path)) == 0


def test_round_trip_bit_identical(tmp_path):
    rng = random.Random(5)
    store = MemoryStore()
    for i in range(100):
        store.append(
            ScenarioKey(f"Pick up the thing {i} ✓", "scene\nwith newline"),
            f"summary {i}",
            [rng.uniform(-1, 1) * 10 ** rng.randint(-12, 12) for _ in range(8)],
            created_at=T0,
            lesson="none" if i % 2 else None,
        )
    path = tmp_path / "store.jsonl"
    store.save(path)
    loaded = MemoryStore.load(path)
    assert loaded.retrieve_all() == store.retrieve_all()
    for a, b in zip(loaded, store):
        assert [x.hex() for x in a.embedding] == [x.hex() for x in b.embedding]


@given(st.lists(st.lists(st.floats(-1e6, 1e6, allow_nan=False, width=64), min_size=3, max_size=3), max_size=10))
def test_round_trip_property(tmp_path_factory, rows):
    store = MemoryStore()
    for i, vec in enumerate(rows):
        if math.fsum(x * x for x in vec) == 0:
            continue
        store.append(_key(i), f"s{i}", vec, created_at=T0)
    path = tmp_path_factory.mktemp("rt") / "s.jsonl"
    store.save(path)
    assert MemoryStore.load(path).retrieve_all() == store.retrieve_all()


def test_load_truncated_file_names_line(tmp_path):
    store = _random_store(random.Random(0), 3, 4)
    path = tmp_path / "s.jsonl"
    store.save(path)
    text = path.read_text()
    path.write_text(text[: len(text) - 20])
    with pytest.raises(StoreParseError) as err:
        MemoryStore.load(path)
    assert err.value.line == 3


def test_load_ignores_unknown_fields(tmp_path):
    path = tmp_path / "s.jsonl"
    path.write_text(
        '{"id": 0, "instruction": "a", "scene": "b", "summary": "c", "embedding": [1.0, 0.0],'
        ' "episode_id": "e", "created_at": "2025-01-01T00:00:00Z", "extra": 1}\n'
    )
    [rec] = MemoryStore.load(path).retrieve_all()
    assert rec.key == ScenarioKey("a", "b")
    assert rec.created_at == datetime(2025, 1, 1, tzinfo=timezone.utc)


def test_load_rejects_missing_field(tmp_path):
    path = tmp_path / "s.jsonl"
    path.write_text('{"id": 0, "instruction": "a"}\n')
    with pytest.raises(StoreParseError):
        MemoryStore.load(path)
