"""Batch runs over scenarios and conditions, and the reference long-term store."""

from __future__ import annotations

import dataclasses
import json
import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from expmem.embedding import Embedder
from expmem.errors import InvalidInput
from expmem.memory import MemoryStore
from expmem.orchestrator import Backends, EpisodeConfig, plan_only, run_episode
from expmem.sim.fillers import seed_fillers
from expmem.sim.scenario import Scenario, bundled_scenarios, corrective_action
from expmem.vlm.scripted import ScriptedBackend

logger = logging.getLogger(__name__)

PRESETS = ("stm", "ltm", "ablation")
FILLERS_PER_BLOCK = 24  # 4 blocks of (1 episode + 24 fillers) = 100 records


@dataclass(frozen=True)
class Condition:
    name: str
    policy: str
    config: EpisodeConfig
    planning_only: bool = False


@dataclass(frozen=True)
class SuiteRow:
    scenario: str
    condition: str
    successes: int
    trials: int

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


@dataclass
class SuiteTable:
    preset: str
    conditions: list[str]
    rows: list[SuiteRow] = field(default_factory=list)

    def cell(self, scenario: str, condition: str) -> SuiteRow:
        for r in self.rows:
            if r.scenario == scenario and r.condition == condition:
                return r
        raise KeyError((scenario, condition))

    def totals(self) -> dict[str, tuple[int, int]]:
        out = {}
        for c in self.conditions:
            rows = [r for r in self.rows if r.condition == c]
            out[c] = (sum(r.successes for r in rows), sum(r.trials for r in rows))
        return out

    def rate(self, condition: str) -> float:
        s, n = self.totals()[condition]
        return s / n if n else 0.0

    def render_text(self) -> str:
        scenarios = list(dict.fromkeys(r.scenario for r in self.rows))

        def fmt(s: int, n: int) -> str:
            return f"{s}/{n} ({100 * s / n:.0f}%)" if n else "-"

        table = [["scenario", *self.conditions]]
        for sc in scenarios:
            table.append([sc, *(fmt(self.cell(sc, c).successes, self.cell(sc, c).trials) for c in self.conditions)])
        table.append(["total", *(fmt(*self.totals()[c]) for c in self.conditions)])
        widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
        return "\n".join("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in table)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps({"preset": self.preset, **dataclasses.asdict(r), "rate": r.rate}) + "\n" for r in self.rows
        )


def trial_seed(base_seed: int, scenario: str, condition: str, trial: int) -> int:
    return zlib.crc32(f"{base_seed}:{scenario}:{condition}:{trial}".encode())


def _run_cell(scenario: Scenario, cond: Condition, trials: int, embedder: Embedder, store, base_seed: int) -> SuiteRow:
    backends = Backends(ScriptedBackend(cond.policy), embedder)
    use_store = store if cond.config.memory_mode == "stm_and_ltm" else None
    wins = 0
    for t in range(trials):
        cfg = dataclasses.replace(cond.config, seed=trial_seed(base_seed, scenario.name, cond.name, t))
        if cond.planning_only:
            outcome = plan_only(scenario, cfg, backends, use_store)
            wins += (outcome.action.skill, outcome.action.target_object) == corrective_action(scenario)
        else:
            wins += run_episode(scenario, cfg, backends, use_store).completed
    return SuiteRow(scenario.name, cond.name, wins, trials)


def run_suite(
    scenarios: list[Scenario],
    conditions: list[Condition],
    embedder: Embedder,
    store: MemoryStore | None = None,
    trials: int = 1,
    seed: int = 0,
    preset: str = "custom",
    workers: int = 1,
) -> SuiteTable:
    """Every (scenario, condition) cell for ``trials`` trials. Output order is fixed."""
    if trials < 1:
        raise InvalidInput("trials must be >= 1")
    cells = [(s, c) for s in scenarios for c in conditions]
    if any(c.config.write_back for _, c in cells):
        raise InvalidInput("suite runs must not write back into the shared store")

    def work(cell):
        return _run_cell(cell[0], cell[1], trials, embedder, store, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(work, cells))
    else:
        rows = [work(c) for c in cells]
    return SuiteTable(preset, [c.name for c in conditions], rows)


def build_reference_store(
    embedder: Embedder, seed: int = 0, fillers_per_block: int = FILLERS_PER_BLOCK
) -> MemoryStore:
    """Write back the four short-term-memory episodes, each followed by a block of fillers."""
    store = MemoryStore()
    backends = Backends(ScriptedBackend("memory_aware"), embedder)
    cfg = EpisodeConfig(memory_mode="stm_and_ltm", retrieval_mode="none", write_back=True, seed=seed)
    for scenario in bundled_scenarios("stm"):
        result = run_episode(scenario, cfg, backends, store)
        if not result.completed:
            raise RuntimeError(f"reference episode {scenario.name} did not complete")
        seed_fillers(store, fillers_per_block, embedder, seed)
    logger.info("reference store built with %d records", len(store))
    return store


def preset_conditions(preset: str, k: int = 5, context_cap: int = 5) -> list[Condition]:
    if preset == "stm":
        return [
            Condition("naive", "naive", EpisodeConfig(memory_mode="none")),
            Condition("reflective", "reflective", EpisodeConfig(memory_mode="stm_only")),
        ]
    if preset == "ltm":
        return [
            Condition("no-ltm", "target_only", EpisodeConfig(memory_mode="stm_only")),
            Condition(
                "full", "memory_aware",
                EpisodeConfig(memory_mode="stm_and_ltm", retrieval_mode="rag", k=k, context_cap=context_cap),
            ),
        ]
    if preset == "ablation":
        return [
            Condition(
                name, "memory_aware",
                EpisodeConfig(memory_mode="stm_and_ltm", retrieval_mode=mode, k=k, context_cap=context_cap),
                planning_only=True,
            )
            for name, mode in (("all", "all"), ("random", "random_k"), ("rag", "rag"))
        ]
    raise InvalidInput(f"unknown preset {preset!r}; expected one of {PRESETS}")


def run_preset(
    preset: str,
    embedder: Embedder,
    store: MemoryStore | None = None,
    trials: int | None = None,
    seed: int = 0,
    k: int = 5,
    context_cap: int = 5,
    workers: int = 1,
) -> SuiteTable:
    conditions = preset_conditions(preset, k, context_cap)
    group = "stm" if preset == "stm" else "ltm"
    if preset != "stm" and store is None:
        store = build_reference_store(embedder, seed)
    default_trials = 20 if preset == "ablation" else 1
    return run_suite(
        bundled_scenarios(group), conditions, embedder, store, trials or default_trials, seed, preset, workers
    )
