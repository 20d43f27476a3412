"""Deterministic stand-ins for every model role, driven by simulator ground truth.

Planner policies:
    naive         plans from the instruction and the current scene only.
    reflective    also reads failure causes and operator notes in the STM.
    memory_aware  reflective, plus lesson tags carried by retrieved memories.
    target_only   reflects, but never manipulates anything except the target;
                  a baseline without interactive replanning or tool use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from expmem.errors import InvalidInput
from expmem.geometry import AnnotatedView
from expmem.sim.observe import Observation
from expmem.sim.world import (
    TABLE,
    Effect,
    Goal,
    SimObject,
    WorldState,
    blocking_object,
    clamp_point,
    goal_satisfied,
    surface_gap,
)
from expmem.stm import StmLedger
from expmem.vlm.backend import Backend
from expmem.vlm.types import Action, FeedbackRecord, RetrievedContext

POLICIES = ("naive", "reflective", "memory_aware", "target_only")

OBSTRUCTION = "push_obstruction_first"
TINY = "use_flat_tool_for_tiny"
FRAGILE = "push_fragile_instead_of_pick"
UNLOAD = "unload_container_before_lift"
NO_LESSON = "none"

# first match wins; the canonical detector strings hit the early entries
_CAUSE_KEYWORDS = (
    ("occlud", OBSTRUCTION),
    ("insufficient contact", TINY),
    ("small", TINY),
    ("crack", FRAGILE),
    ("fragile", FRAGILE),
    ("dropped", UNLOAD),
    ("fell", UNLOAD),
)


def classify_failure(text: str) -> str | None:
    """Map a failure cause or operator note to the trap it points at."""
    low = text.lower()
    for keyword, tag in _CAUSE_KEYWORDS:
        if keyword in low:
            return tag
    return None


@dataclass(frozen=True)
class Intent:
    kind: str  # "pick" or "move"
    subject: str
    destination: str | None = None


_PICK_RE = re.compile(r"^\s*(?:pick up|pick|grab|lift)\s+(?:the\s+)?(?P<x>.+?)\s*\.?\s*$", re.I)
_MOVE_RE = re.compile(
    r"^\s*(?:put|place|move|bring)\s+(?:the\s+)?(?P<x>.+?)\s+"
    r"(?:next to|close to|near|on top of|onto|into|on|in|to)\s+(?:the\s+)?(?P<y>.+?)\s*\.?\s*$",
    re.I,
)


def _resolve(phrase: str, world: WorldState) -> str | None:
    """Longest object name occurring in ``phrase`` as whole words."""
    low = phrase.lower()
    hits = [o.name for o in world.objects if re.search(rf"\b{re.escape(o.name.lower())}\b", low)]
    if not hits and low.strip() == TABLE:
        return TABLE
    return max(hits, key=len) if hits else None


def parse_intent(instruction: str, world: WorldState, goal: Goal | None = None) -> Intent:
    m = _MOVE_RE.match(instruction)
    if m:
        subject, dest = _resolve(m["x"], world), _resolve(m["y"], world)
        if subject:
            return Intent("move", subject, dest)
    m = _PICK_RE.match(instruction)
    if m and _resolve(m["x"], world):
        return Intent("pick", _resolve(m["x"], world))
    if goal is not None:
        return Intent("pick" if goal.type == "held" else "move", goal.subject, goal.target)
    raise InvalidInput(f"cannot work out what to do from {instruction!r}")


def _direction(frm: SimObject, to: SimObject | None) -> str:
    return "left" if to is not None and to.position.x < frm.position.x else "right"


def _away(obstacle: SimObject, target: SimObject) -> str:
    return "left" if obstacle.position.x < target.position.x else "right"


def _cargo(world: WorldState, target: SimObject) -> list[SimObject]:
    ids = list(target.contents) + ([target.supports] if target.supports else [])
    return [world.obj(i) for i in ids if i not in world.dropped_items and i != world.held]


def _nearest_tool(world: WorldState, target: SimObject) -> SimObject | None:
    tools = [o for o in world.on_table() if o.flat_tool_face and o.id != target.id]
    return min(tools, key=lambda o: o.position.distance(target.position)) if tools else None


def _plan(intent: Intent, world: WorldState, traps: set[str], scene: str) -> Action:
    prose = {"scene_description": scene}
    target = world.find(intent.subject)
    if target is None:
        return Action.pick(intent.subject, action_description=f"Pick up the {intent.subject}.", **prose)
    held = world.obj(world.held) if world.held else None
    dest = world.find(intent.destination) if intent.destination else None
    on_table = target.id in {o.id for o in world.on_table()}

    def pick(o: SimObject, why: str) -> Action:
        return Action.pick(
            o.name, specific=o.handle_cell is not None, action_description=f"Pick up the {o.name}.", reasoning=why, **prose
        )

    def place(o: SimObject, where: str, why: str) -> Action:
        return Action.place(o.name, where, action_description=f"Place the {o.name} on the {where}.", reasoning=why, **prose)

    def push(o: SimObject, direction: str, why: str) -> Action:
        return Action.push(o.name, direction, action_description=f"Push the {o.name} to the {direction}.", reasoning=why, **prose)

    if UNLOAD in traps and intent.kind == "pick" and world.held != target.id:
        cargo = _cargo(world, target)
        if held is not None:
            return place(held, TABLE, "Free the gripper before lifting the target.")
        if cargo:
            return pick(cargo[0], f"Lifting the {target.name} with the {cargo[0].name} on it drops it.")
    if TINY in traps and target.tiny and on_table:
        if world.held_tool() is not None:
            return push(target, _direction(target, dest), f"Use the {held.name} to push the {target.name}.")
        if held is not None:
            return place(held, TABLE, "Free the gripper to fetch a tool.")
        tool = _nearest_tool(world, target)
        if tool is not None:
            return pick(tool, f"The {target.name} is too small to grasp; the {tool.name} can push it.")
    if FRAGILE in traps and target.fragile and intent.kind == "move" and on_table:
        return push(target, _direction(target, dest), f"Grasping the {target.name} breaks it; pushing is safe.")
    if OBSTRUCTION in traps and on_table and held is None:
        blocker = blocking_object(world, target)
        if blocker is not None:
            return push(blocker, _away(blocker, target), f"The {blocker.name} is in the way of the {target.name}.")

    if intent.kind == "move" and world.held == target.id:
        return place(target, intent.destination or TABLE, "The target is in the gripper.")
    if held is not None and held.id != target.id:
        return place(held, TABLE, "The gripper is occupied.")
    return pick(target, f"The task needs the {target.name}.")


def _plan_policy(policy: str, instruction: str, obs: Observation, stm: StmLedger, context: RetrievedContext) -> Action:
    world = obs.truth.world
    intent = parse_intent(instruction, world, obs.truth.goal)
    traps: set[str] = set()
    if policy != "naive":
        traps = {t for t in map(classify_failure, stm.failure_texts()) if t}
    if policy == "memory_aware":
        traps.update(context.lessons())
    if policy == "target_only":
        traps &= {FRAGILE}
    return _plan(intent, world, traps, obs.scene_text)


def _cause(effect: Effect, world: WorldState) -> tuple[str, str]:
    """Canonical (failure cause, next-step suggestion) for a failed effect."""
    t = effect.target
    if effect.kind == "grasp_blocked" and effect.detail == "occluded":
        return f"target occluded by {effect.subject}", f"push the {effect.subject} away"
    if effect.kind == "too_small_contact" or (effect.kind == "grasp_blocked" and effect.detail == "too small"):
        target = world.find(t)
        tool = world.held_tool() or (_nearest_tool(world, target) if target else None)
        hint = f"use the {tool.name} as a tool to push the {t}" if tool else f"push the {t} instead"
        return "object too small, insufficient contact", hint
    if effect.kind == "cracked":
        return "object cracked while grasping", f"push the {t} instead of grasping it"
    if effect.kind == "contents_dropped":
        return f"{effect.subject} dropped from {t}", f"move the {effect.subject} to the table before lifting the {t}"
    if effect.kind == "not_holding":
        return f"gripper is not holding the {t}", f"pick up the {t} first"
    if effect.kind == "unknown_object":
        return f"{t} not found", "choose an object that is on the table"
    if effect.detail == "gripper is occupied":
        return f"gripper already holds the {effect.subject}", f"place the {effect.subject} on the table first"
    return f"grasp failed: {effect.detail}", f"try a different way to move the {t}"


def _progress_hint(world: WorldState, goal: Goal | None) -> str:
    if goal is None or goal.type != "at" or world.held is None:
        return ""
    held = world.obj(world.held)
    if held.name == goal.subject:
        return f"place the {held.name} on the {goal.target}"
    return ""


def _evaluate(obs: Observation) -> FeedbackRecord:
    truth = obs.truth
    effect, world, goal = truth.last_effect, truth.world, truth.goal
    done = goal is not None and goal_satisfied(world, goal)
    if effect is None:
        return FeedbackRecord("uncertain", reasoning="no action outcome is available")
    if effect.ok:
        hint = "" if done else _progress_hint(world, goal)
        return FeedbackRecord("successful", "", hint, done, f"the {effect.target} action had its intended effect")
    cause, hint = _cause(effect, world)
    return FeedbackRecord("failed", cause, hint, False, f"effect {effect.kind}: {effect.detail}")


def _grasp_label(action: Action, view: AnnotatedView, obs: Observation) -> int:
    target = obs.truth.world.find(action.target_object)
    if target is None or target.handle_cell is None:
        return view.labels[0]
    return min(view.candidates, key=lambda c: (c.location.distance(target.handle_cell), c.label)).label


def _placement_label(action: Action, view: AnnotatedView, obs: Observation) -> int:
    world = obs.truth.world
    dest = world.find(action.placement_location or "")
    others = [o for o in world.on_table() if dest is None or o.id != dest.id]
    others = [o for o in others if dest is None or o.id not in dest.contents]
    if not others:
        return view.labels[0]

    def clearance(c) -> float:
        return min(c.location.distance(o.position) - o.extent for o in others)

    return max(view.candidates, key=lambda c: (clearance(c), -c.label)).label


def _push_label(action: Action, view: AnnotatedView, obs: Observation) -> int:
    world, goal = obs.truth.world, obs.truth.goal
    target = world.find(action.target_object)
    if goal is not None and target is not None:
        subject = world.find(goal.subject)
        for c in view.candidates:
            end = clamp_point(c.location, world.params)
            if subject is not None and subject.id == target.id:
                dest = world.find(goal.target) if goal.type == "at" else None
                if dest is not None and end.distance(dest.position) <= goal.radius:
                    return c.label
            elif subject is not None:
                moved = replace(target, position=end)
                if surface_gap(moved, subject) >= world.params.occlusion_gap:
                    return c.label
    return view.labels[-1]


def _try_phrase(a: Action) -> str:
    if a.skill == "pick":
        return f"pick up the {a.target_object}"
    if a.skill == "place":
        return f"place the {a.target_object} on the {a.placement_location}"
    return f"push the {a.target_object} {a.push_direction}"


def _done_phrase(a: Action) -> str:
    if a.skill == "pick":
        return f"picked up the {a.target_object}"
    if a.skill == "place":
        return f"placed the {a.target_object} on the {a.placement_location}"
    return f"pushed the {a.target_object} to the {a.push_direction}"


def infer_lesson(stm: StmLedger) -> str:
    """Lesson tag from the earliest classifiable failure cause or operator note."""
    events = [(e.step, 0, e.feedback.failure_cause) for e in stm.entries if e.feedback.failed]
    events += [(step, 1, text) for step, text in stm.operator_notes]
    for _, _, text in sorted(events):
        tag = classify_failure(text)
        if tag:
            return tag
    return NO_LESSON


def _reflection(stm: StmLedger, lesson: str) -> str:
    failed = next((e for e in stm.entries if e.feedback.failed), None)
    target = failed.action.target_object if failed else "target"
    cause = failed.feedback.failure_cause if failed else ""
    if lesson == OBSTRUCTION:
        m = re.search(r"occluded by (.+)$", cause)
        blocker = m.group(1) if m else "obstacle"
        return f"Lesson: push the {blocker} out of the way before grasping the {target}."
    if lesson == TINY:
        tool = next(
            (e.action.target_object for e in stm.entries
             if e.action.skill == "pick" and e.action.target_object != target and not e.feedback.failed),
            "a flat tool",
        )
        return f"Lesson: the {target} is too small to grasp, so hold the {tool} and push the {target} with it."
    if lesson == FRAGILE:
        return f"Lesson: grasping the {target} cracks it, so push it instead."
    if lesson == UNLOAD:
        m = re.search(r"^(.+) dropped from (.+)$", cause)
        item, container = (m.group(1), m.group(2)) if m else ("item inside", target)
        return f"Lesson: take the {item} out of the {container} and set it on the table before lifting the {container}."
    return ""


def summarize_stm(stm: StmLedger) -> tuple[str, str]:
    if not stm.entries:
        raise InvalidInput("cannot summarize an empty short-term memory")
    notes = sorted(stm.operator_notes)
    sentences, ni = [], 0
    for e in stm.entries:
        while ni < len(notes) and notes[ni][0] <= e.step:
            sentences.append(f"A human observer reported: {notes[ni][1].rstrip('.')}.")
            ni += 1
        lead = "The robot" if not sentences else "It"
        if e.feedback.failed:
            sentences.append(f"{lead} tried to {_try_phrase(e.action)} but failed: {e.feedback.failure_cause}.")
        else:
            sentences.append(f"{lead} {_done_phrase(e.action)}.")
    sentences.extend(f"A human observer reported: {text.rstrip('.')}." for _, text in notes[ni:])
    lesson = infer_lesson(stm)
    if lesson != NO_LESSON:
        sentences.append(_reflection(stm, lesson))
    done = stm.entries[-1].feedback.completed
    sentences.append("The task was completed." if done else "The task was not completed.")
    return " ".join(sentences), lesson


class ScriptedBackend(Backend):
    """Pure functions of their inputs plus the observation's ground truth."""

    def __init__(self, policy: str = "reflective") -> None:
        if policy not in POLICIES:
            raise InvalidInput(f"unknown scripted policy {policy!r}; expected one of {POLICIES}")
        self.policy = policy
        self.name = f"scripted-{policy.replace('_', '-')}"

    def describe_scene(self, instruction: str, observation: Observation) -> str:
        return observation.scene_text

    def plan_action(
        self, instruction: str, observation: Observation, stm: StmLedger, context: RetrievedContext
    ) -> Action:
        if not instruction.strip():
            raise InvalidInput("instruction must not be empty")
        return _plan_policy(self.policy, instruction, observation, stm, context)

    def choose_grasp_section(self, action: Action, view: AnnotatedView, observation: Observation) -> int:
        return _grasp_label(action, view, observation)

    def choose_placement(self, action: Action, view: AnnotatedView, observation: Observation) -> int:
        return _placement_label(action, view, observation)

    def choose_push_spot(self, action: Action, view: AnnotatedView, observation: Observation) -> int:
        return _push_label(action, view, observation)

    def evaluate_action(self, action: Action, observation: Observation, instruction: str) -> FeedbackRecord:
        return _evaluate(observation)

    def summarize_experience(self, stm: StmLedger) -> tuple[str, str | None]:
        return summarize_stm(stm)
