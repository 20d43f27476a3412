"""Long-term experience store.

Append-only collection of (scenario key, summary) records, each carrying the
embedding of its key. Retrieval comes in three flavours: cosine top-k, seeded
random-k, and everything in insertion order. Persistence is one JSON object
per line.
"""

from __future__ import annotations

import json
import logging
import math
import random
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from expmem.errors import InvalidInput, StoreParseError

logger = logging.getLogger(__name__)

DEFAULT_K = 5
KEY_SEPARATOR = "\n"


@dataclass(frozen=True)
class ScenarioKey:
    instruction: str
    scene_description: str

    def __post_init__(self) -> None:
        if not self.instruction.strip():
            raise InvalidInput("scenario key needs a nonempty instruction")

    def key_text(self) -> str:
        return self.instruction + KEY_SEPARATOR + self.scene_description


@dataclass(frozen=True)
class ExperienceRecord:
    id: int
    key: ScenarioKey
    summary: str
    embedding: tuple[float, ...]
    episode_id: str
    created_at: datetime
    lesson: str | None = None


@dataclass(frozen=True)
class RetrievalResult:
    record: ExperienceRecord
    similarity: float


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise InvalidInput(f"dimension mismatch: {len(a)} vs {len(b)}")
    na = math.sqrt(math.fsum(x * x for x in a))
    nb = math.sqrt(math.fsum(x * x for x in b))
    if na == 0.0 or nb == 0.0:
        raise InvalidInput("cosine similarity is undefined for a zero vector")
    sim = math.fsum(x * y for x, y in zip(a, b)) / (na * nb)
    return max(-1.0, min(1.0, sim))


def _format_time(ts: datetime) -> str:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.isoformat()


def _parse_time(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


class MemoryStore:
    """Append-only long-term memory.

    The embedding dimension is fixed by the first append. Appends are
    serialised by a lock; retrieval works on a snapshot taken at call time.
    """

    def __init__(self, dimension: int | None = None) -> None:
        self._records: list[ExperienceRecord] = []
        self._dimension = dimension
        self._lock = threading.Lock()
        self._matrix: np.ndarray | None = None
        self._norms: np.ndarray | None = None

    @property
    def dimension(self) -> int | None:
        return self._dimension

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self.retrieve_all())

    def get(self, record_id: int) -> ExperienceRecord:
        for rec in self._records:
            if rec.id == record_id:
                return rec
        raise KeyError(record_id)

    def append(
        self,
        key: ScenarioKey,
        summary: str,
        embedding: Sequence[float],
        episode_id: str = "",
        created_at: datetime | None = None,
        lesson: str | None = None,
    ) -> int:
        vec = tuple(float(x) for x in embedding)
        if not vec or not all(math.isfinite(x) for x in vec):
            raise InvalidInput("embedding must be a nonempty finite vector")
        if math.fsum(x * x for x in vec) == 0.0:
            raise InvalidInput("embedding must be nonzero")
        with self._lock:
            if self._dimension is None:
                self._dimension = len(vec)
            elif len(vec) != self._dimension:
                raise InvalidInput(f"embedding has dimension {len(vec)}, store expects {self._dimension}")
            record_id = self._records[-1].id + 1 if self._records else 0
            rec = ExperienceRecord(
                id=record_id,
                key=key,
                summary=summary,
                embedding=vec,
                episode_id=episode_id or f"episode-{record_id}",
                created_at=created_at or datetime.now(timezone.utc),
                lesson=lesson,
            )
            self._records = self._records + [rec]
            self._matrix = None
        return record_id

    def _snapshot(self) -> tuple[list[ExperienceRecord], np.ndarray, np.ndarray]:
        with self._lock:
            records = self._records
            if self._matrix is None and records:
                self._matrix = np.array([r.embedding for r in records], dtype=float)
                self._norms = np.sqrt((self._matrix * self._matrix).sum(axis=1))
            return records, self._matrix, self._norms

    def retrieve_top_k(self, query_embedding: Sequence[float], k: int = DEFAULT_K) -> list[RetrievalResult]:
        """The ``k`` most cosine-similar records, most similar first; older wins ties."""
        if k < 1:
            raise InvalidInput(f"k must be >= 1, got {k}")
        records, matrix, norms = self._snapshot()
        if not records:
            return []
        q = np.asarray(query_embedding, dtype=float)
        if q.shape != (matrix.shape[1],):
            raise InvalidInput(f"query has dimension {q.size}, store expects {matrix.shape[1]}")
        qn = math.sqrt(float((q * q).sum()))
        if qn == 0.0:
            raise InvalidInput("query embedding must be nonzero")
        sims = np.clip((matrix * q).sum(axis=1) / (norms * qn), -1.0, 1.0)
        # stable sort keeps insertion order among equal similarities
        order = np.argsort(-sims, kind="stable")[:k]
        return [RetrievalResult(records[i], float(sims[i])) for i in order]

    def retrieve_random_k(self, k: int = DEFAULT_K, seed: int = 0) -> list[ExperienceRecord]:
        if k < 1:
            raise InvalidInput(f"k must be >= 1, got {k}")
        records, _, _ = self._snapshot()
        if k >= len(records):
            return list(records)
        return random.Random(seed).sample(records, k)

    def retrieve_all(self) -> list[ExperienceRecord]:
        return list(self._snapshot()[0])

    def save(self, path: str | Path) -> None:
        lines = []
        for r in self.retrieve_all():
            row = {
                "id": r.id,
                "instruction": r.key.instruction,
                "scene": r.key.scene_description,
                "summary": r.summary,
                "embedding": list(r.embedding),
                "episode_id": r.episode_id,
                "created_at": _format_time(r.created_at),
            }
            if r.lesson is not None:
                row["lesson"] = r.lesson
            lines.append(json.dumps(row, ensure_ascii=False))
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> MemoryStore:
        store = cls()
        text = Path(path).read_text(encoding="utf-8")
        records: list[ExperienceRecord] = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                rec = ExperienceRecord(
                    id=int(row["id"]),
                    key=ScenarioKey(row["instruction"], row["scene"]),
                    summary=row["summary"],
                    embedding=tuple(float(x) for x in row["embedding"]),
                    episode_id=row["episode_id"],
                    created_at=_parse_time(row["created_at"]),
                    lesson=row.get("lesson"),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise StoreParseError(lineno, f"{type(exc).__name__}: {exc}") from exc
            if records and rec.id <= records[-1].id:
                raise StoreParseError(lineno, f"record id {rec.id} is not increasing")
            if records and len(rec.embedding) != len(records[0].embedding):
                raise StoreParseError(lineno, "embedding dimension differs from earlier records")
            records.append(rec)
        store._records = records
        store._dimension = len(records[0].embedding) if records else None
        logger.debug("loaded %d records from %s", len(records), path)
        return store
