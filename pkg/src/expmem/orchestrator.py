"""The plan / execute / verify / reflect loop with short- and long-term memory."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Callable

from expmem.embedding import Embedder
from expmem.errors import InvalidInput, ProtocolViolation
from expmem.geometry import AnnotatedView
from expmem.memory import MemoryStore, ScenarioKey
from expmem.sim.fillers import logical_time
from expmem.sim.observe import Observation, grasp_view, observe, placement_view, push_view
from expmem.sim.scenario import Scenario, reset
from expmem.sim.world import Effect, WorldState, execute
from expmem.stm import StmLedger
from expmem.vlm.backend import Backend
from expmem.vlm.types import RETRIEVAL_MODES, Action, ContextEntry, FeedbackRecord, RetrievedContext

logger = logging.getLogger(__name__)

MEMORY_MODES = ("none", "stm_only", "stm_and_ltm")


@dataclass(frozen=True)
class EpisodeConfig:
    memory_mode: str = "stm_only"
    retrieval_mode: str = "none"
    k: int = 5
    context_cap: int = 5
    max_steps: int = 10
    attempts_allowed: int | None = None  # None: take it from the scenario
    seed: int = 0
    write_back: bool = False

    def __post_init__(self) -> None:
        if self.memory_mode not in MEMORY_MODES:
            raise InvalidInput(f"memory_mode must be one of {MEMORY_MODES}")
        if self.retrieval_mode not in RETRIEVAL_MODES:
            raise InvalidInput(f"retrieval_mode must be one of {RETRIEVAL_MODES}")
        if self.k < 1 or self.context_cap < 1:
            raise InvalidInput("k and context_cap must be >= 1")
        if self.retrieval_mode == "rag" and self.k > self.context_cap:
            raise InvalidInput(f"k={self.k} exceeds context_cap={self.context_cap}")
        if self.max_steps < 1:
            raise InvalidInput("max_steps must be >= 1")
        if self.attempts_allowed is not None and self.attempts_allowed < 1:
            raise InvalidInput("attempts_allowed must be >= 1")
        if self.write_back and self.memory_mode != "stm_and_ltm":
            raise InvalidInput("write_back needs memory_mode=stm_and_ltm")


@dataclass(frozen=True)
class Backends:
    vlm: Backend
    embedder: Embedder


@dataclass(frozen=True)
class StepLog:
    step: int
    attempt: int
    action: Action
    label: int | None
    effect: Effect
    feedback: FeedbackRecord
    context_ids: tuple[int, ...]
    reset: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": "step",
            "step": self.step,
            "attempt": self.attempt,
            "action": dataclasses.asdict(self.action),
            "label": self.label,
            "effect": self.effect.to_dict(),
            "feedback": dataclasses.asdict(self.feedback),
            "context_ids": list(self.context_ids),
            "reset": self.reset,
        }


@dataclass
class EpisodeResult:
    scenario: str
    instruction: str
    completed: bool
    steps_taken: int
    attempts_used: int
    stm: StmLedger
    key: ScenarioKey
    context: RetrievedContext
    log: list[StepLog] = field(default_factory=list)
    summary: str | None = None
    lesson: str | None = None
    record_id: int | None = None

    def log_records(self, backend: str = "", config: EpisodeConfig | None = None) -> list[dict[str, Any]]:
        header = {"type": "header", "scenario": self.scenario, "instruction": self.instruction, "backend": backend}
        if config is not None:
            header["config"] = dataclasses.asdict(config)
        notes = [{"type": "note", "step": s, "text": t} for s, t in self.stm.operator_notes]
        footer = {
            "type": "result",
            "completed": self.completed,
            "steps_taken": self.steps_taken,
            "attempts_used": self.attempts_used,
            "summary": self.summary,
            "lesson": self.lesson,
            "record_id": self.record_id,
        }
        return [header, *notes, *(s.to_dict() for s in self.log), footer]


def build_key(instruction: str, observation: Observation, backend: Backend) -> ScenarioKey:
    if not instruction.strip():
        raise InvalidInput("instruction must not be empty")
    return ScenarioKey(instruction, backend.describe_scene(instruction, observation))


def retrieve_context(store: MemoryStore, query_embedding, config: EpisodeConfig) -> RetrievedContext:
    """Fetch records by ``config.retrieval_mode``, then keep the first ``context_cap``."""
    mode = config.retrieval_mode
    if mode == "none" or len(store) == 0:
        return RetrievedContext((), mode)
    if store.dimension is not None and len(query_embedding) != store.dimension:
        raise InvalidInput(f"query has dimension {len(query_embedding)}, store expects {store.dimension}")
    if mode == "rag":
        records = [r.record for r in store.retrieve_top_k(query_embedding, config.k)]
    elif mode == "random_k":
        records = store.retrieve_random_k(config.k, config.seed)
    else:
        records = store.retrieve_all()
    entries = tuple(ContextEntry(r.key, r.summary, r.lesson, r.id) for r in records[: config.context_cap])
    return RetrievedContext(entries, mode)


class Episode:
    """One instruction, executed step by step.

    ``step()`` advances the loop by a single plan/execute/evaluate cycle so
    callers can interleave operator notes; ``run_episode`` drives it to the end.
    """

    def __init__(
        self,
        scenario: Scenario,
        config: EpisodeConfig,
        backends: Backends,
        store: MemoryStore | None = None,
        clock: Callable[[int], datetime] = logical_time,
    ) -> None:
        if (config.memory_mode == "stm_and_ltm") != (store is not None):
            raise InvalidInput("a store is required exactly when memory_mode=stm_and_ltm")
        self.scenario = scenario
        self.config = config
        self.backends = backends
        self.store = store
        self._clock = clock
        self.attempts_allowed = config.attempts_allowed or scenario.attempts_allowed
        self.world: WorldState = reset(scenario)
        self.observation = observe(self.world, scenario.goal)
        self.key = build_key(scenario.instruction, self.observation, backends.vlm)
        self._key_embedding = None
        self.context = RetrievedContext((), "none")
        if store is not None:
            self._key_embedding = backends.embedder.embed(self.key.key_text())
            self.context = retrieve_context(store, self._key_embedding, config)
        self.stm = StmLedger()
        self.log: list[StepLog] = []
        self.attempts_used = 1
        self.completed = False
        self._stopped = False
        self._pending_notes = sorted(scenario.operator_notes)

    @property
    def done(self) -> bool:
        return self._stopped or self.completed or len(self.log) >= self.config.max_steps

    def inject_operator_note(self, text: str) -> StmLedger:
        if self.done:
            raise InvalidInput("episode has finished; operator notes are no longer accepted")
        self.stm.add_note(text)
        return self.stm

    def _annotate(self, action: Action) -> tuple[AnnotatedView | None, int | None]:
        vlm, world, obs = self.backends.vlm, self.world, self.observation
        target = world.find(action.target_object)
        on_table = target is not None and target.id in {o.id for o in world.on_table()}
        view, label = None, None
        if action.skill == "pick" and action.specific_grasp_required and on_table:
            view = grasp_view(world, target)
            label = vlm.choose_grasp_section(action, view, obs)
        elif action.skill == "place" and action.precise_placement_spot_required and world.held is not None:
            view = placement_view(world, action.placement_location)
            if view is not None:
                label = vlm.choose_placement(action, view, obs)
        elif action.skill == "push" and on_table:
            view = push_view(world, target, action.push_direction)
            label = vlm.choose_push_spot(action, view, obs)
        if view is not None and label not in view.labels:
            raise ProtocolViolation(f"selector returned label {label}, expected one of {view.labels}")
        return view, label

    def step(self) -> StepLog:
        if self.done:
            raise InvalidInput("episode has finished")
        while self._pending_notes and self._pending_notes[0][0] <= self.stm.next_step:
            self.stm.add_note(self._pending_notes.pop(0)[1])
        cfg, vlm, instr = self.config, self.backends.vlm, self.scenario.instruction
        planner_stm = self.stm if cfg.memory_mode != "none" else StmLedger()
        planner_ctx = self.context if cfg.memory_mode == "stm_and_ltm" else RetrievedContext((), "none")
        action = vlm.plan_action(instr, self.observation, planner_stm, planner_ctx)
        _, label = self._annotate(action)

        before = self.world
        after, effect = execute(before, action, label)
        self.world = after
        self.observation = observe(after, self.scenario.goal, effect)
        feedback = vlm.evaluate_action(action, self.observation, instr)
        entry = self.stm.record(action, feedback)
        logger.debug("step %d: %s -> %s / %s", entry.step, action.call_text(), effect.kind, feedback.status)

        did_reset = False
        if feedback.completed:
            self.completed = True
        elif feedback.failed and after != before:
            if self.attempts_used >= self.attempts_allowed:
                self._stopped = True
            else:
                # the operator restores the scene before the next attempt
                self.world = reset(self.scenario)
                self.observation = observe(self.world, self.scenario.goal)
                self.attempts_used += 1
                did_reset = True
        record = StepLog(
            entry.step, self.attempts_used - did_reset, action, label, effect, feedback,
            tuple(self.context.record_ids), did_reset,
        )
        self.log.append(record)
        return record

    def finish(self) -> EpisodeResult:
        result = EpisodeResult(
            scenario=self.scenario.name,
            instruction=self.scenario.instruction,
            completed=self.completed,
            steps_taken=len(self.log),
            attempts_used=self.attempts_used,
            stm=self.stm,
            key=self.key,
            context=self.context,
            log=list(self.log),
        )
        if self.completed and self.config.write_back:
            summary, lesson = self.backends.vlm.summarize_experience(self.stm)
            rid = self.store.append(
                self.key,
                summary,
                self._key_embedding,
                episode_id=f"{self.scenario.name}#seed{self.config.seed}",
                created_at=self._clock(len(self.store)),
                lesson=lesson,
            )
            result.summary, result.lesson, result.record_id = summary, lesson, rid
        return result


def run_episode(
    scenario: Scenario,
    config: EpisodeConfig,
    backends: Backends,
    store: MemoryStore | None = None,
    on_step: Callable[[Episode, StepLog], None] | None = None,
) -> EpisodeResult:
    episode = Episode(scenario, config, backends, store)
    while not episode.done:
        record = episode.step()
        if on_step is not None and not episode.done:
            on_step(episode, record)
    return episode.finish()


@dataclass(frozen=True)
class PlanOutcome:
    scenario: str
    key: ScenarioKey
    context: RetrievedContext
    action: Action


def plan_only(
    scenario: Scenario, config: EpisodeConfig, backends: Backends, store: MemoryStore | None = None
) -> PlanOutcome:
    """Key, retrieval and the first planned action. Nothing is executed."""
    world = reset(scenario)
    obs = observe(world, scenario.goal)
    key = build_key(scenario.instruction, obs, backends.vlm)
    context = RetrievedContext((), "none")
    if store is not None and config.memory_mode == "stm_and_ltm":
        context = retrieve_context(store, backends.embedder.embed(key.key_text()), config)
    action = backends.vlm.plan_action(scenario.instruction, obs, StmLedger(), context)
    return PlanOutcome(scenario.name, key, context, action)


def render_transcript(result: EpisodeResult) -> str:
    """Human-readable interleaving of actions, effects, feedback and notes."""
    lines = [f"Instruction: {result.instruction}", f"Scene: {result.key.scene_description}"]
    if result.context.entries:
        lines.append(f"Retrieved memories ({result.context.mode}): {result.context.record_ids}")
    notes = sorted(result.stm.operator_notes)
    ni = 0
    for s in result.log:
        while ni < len(notes) and notes[ni][0] <= s.step:
            lines.append(f"Observation from human: {notes[ni][1]}")
            ni += 1
        fb = s.feedback
        label = f" [label {s.label}]" if s.label is not None else ""
        lines.append(f"At time step {s.step}, the robot executed {s.action.call_text()}{label}: {s.effect.kind}.")
        detail = f"  Action status: {fb.status}."
        if fb.failure_cause:
            detail += f" Failure cause: {fb.failure_cause}."
        if fb.next_step_suggestion:
            detail += f" Suggestions for next action: {fb.next_step_suggestion}."
        lines.append(detail)
        if s.reset:
            lines.append("  The scene was reset for another attempt.")
    lines.extend(f"Observation from human: {t}" for _, t in notes[ni:])
    outcome = "completed" if result.completed else "not completed"
    lines.append(f"Task {outcome} after {result.steps_taken} steps and {result.attempts_used} attempt(s).")
    if result.summary:
        lines.append(f"Summary: {result.summary}")
    return "\n".join(lines)
