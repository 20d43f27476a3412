"""Synthetic simple-task experiences used to pad the long-term store.

Names come from a fixed bank that shares no object with the bundled
scenarios, so padding never answers a trap by accident.
"""

from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone

from expmem.embedding import Embedder
from expmem.memory import MemoryStore, ScenarioKey

NAME_BANK = (
    "water bottle", "spoon", "remote", "cup", "marker", "book", "phone", "stapler",
    "notebook", "glass", "key", "wallet", "pen", "mouse", "tape", "fork", "lid",
    "jar", "ruler", "glove", "cable", "clip", "cloth", "bell",
)
SURFACES = ("tray", "shelf", "mat", "board", "stand", "rack")

# deterministic record timestamps: one minute per record from this origin
CLOCK_ORIGIN = datetime(2025, 1, 1, tzinfo=timezone.utc)


def logical_time(index: int) -> datetime:
    return CLOCK_ORIGIN + timedelta(minutes=index)


def filler_record(rng: random.Random) -> tuple[ScenarioKey, str]:
    a, b = rng.sample(NAME_BANK, 2)
    surface = rng.choice(SURFACES)
    template = rng.randrange(4)
    if template == 0:
        return (
            ScenarioKey(f"Pick up the {a}.", f"a {a} on the table"),
            f"The robot grasped the {a} from the top and lifted it without any problem.",
        )
    if template == 1:
        return (
            ScenarioKey(f"Place the {a} next to the {b}.", f"a {b} on the table; the gripper is holding a {a}"),
            f"The robot lowered the {a} beside the {b} and opened the gripper.",
        )
    if template == 2:
        return (
            ScenarioKey(f"Put the {a} on the {surface}.", f"a {a} and a {surface} on the table"),
            f"The robot picked up the {a}, carried it to the {surface} and released it there.",
        )
    return (
        ScenarioKey(f"Pick up the {a} next to the {b}.", f"a {a} next to a {b} on the table"),
        f"The robot grasped the {a} from the side away from the {b} and lifted it.",
    )


def seed_fillers(store: MemoryStore, n: int, embedder: Embedder, seed: int = 0) -> list[int]:
    """Append ``n`` filler records; the same (store size, n, seed) always yields the same records."""
    rng = random.Random(f"fillers:{seed}:{len(store)}")
    ids = []
    for _ in range(n):
        key, summary = filler_record(rng)
        idx = len(store)
        ids.append(
            store.append(
                key,
                summary,
                embedder.embed(key.key_text()),
                episode_id=f"filler-{seed}-{idx}",
                created_at=logical_time(idx),
                lesson="none",
            )
        )
    return ids
