"""Observations of a simulated world: canonical scene text, masks and grasp hypotheses."""

from __future__ import annotations

from dataclasses import dataclass, field

from expmem.geometry import AnnotatedView, GraspHypothesis, RasterMask, annotate
from expmem.sim.world import (
    Effect,
    Goal,
    SimObject,
    WorldState,
    candidate_placements,
    grasp_hypotheses,
    object_mask,
    placement_candidates,
    push_candidates,
    surface_gap,
)

EMPTY_SCENE = "an empty table"


@dataclass(frozen=True)
class GroundTruth:
    """What the scripted roles may peek at. Remote roles never see this."""

    world: WorldState
    goal: Goal | None = None
    last_effect: Effect | None = None


@dataclass(frozen=True)
class Observation:
    scene_text: str
    objects: tuple[str, ...]
    masks: dict[str, RasterMask] = field(compare=True)
    grasps: dict[str, tuple[GraspHypothesis, ...]] = field(compare=True)
    held: str | None
    dropped: tuple[str, ...]
    truth: GroundTruth

    def to_text(self) -> str:
        """Plain-text stand-in for the camera image, used in remote prompts."""
        world = self.truth.world
        lines = [f"Scene: {self.scene_text}."]
        for name in self.objects:
            o = world.find(name)
            tags = [t for t in ("fragile", "tiny", "cracked") if getattr(o, t)]
            if o.is_container:
                tags.append("container")
            extra = f" ({', '.join(tags)})" if tags else ""
            lines.append(f"- {name} at (x={o.position.x:.1f}, y={o.position.y:.1f}), radius {o.extent:g}{extra}")
        lines.append(f"Gripper holds: {self.held or 'nothing'}.")
        if self.dropped:
            lines.append(f"On the floor: {', '.join(self.dropped)}.")
        return "\n".join(lines)


def _article(phrase: str) -> str:
    return ("an " if phrase[0] in "aeiou" else "a ") + phrase


def _noun_phrase(world: WorldState, o: SimObject) -> str:
    adjectives = []
    if o.cracked:
        adjectives.append("cracked")
    elif o.fragile:
        adjectives.append("fragile")
    if o.tiny:
        adjectives.append("tiny")
    text = _article(" ".join(adjectives + [o.name]))
    inside = [world.obj(i) for i in o.contents if i not in world.dropped_items and i != world.held]
    if inside:
        text += " with " + " and ".join(_article(i.name) for i in inside) + " inside"
    if o.supports and o.supports not in world.dropped_items and o.supports != world.held:
        text += " with " + _article(world.obj(o.supports).name) + " on top"
    return text


def _join(parts: list[str]) -> str:
    if len(parts) == 1:
        return parts[0]
    return ", ".join(parts[:-1]) + " and " + parts[-1]


def describe_world(world: WorldState) -> str:
    """Canonical scene template. Identical worlds give identical text."""
    nested = {i for o in world.objects for i in o.contents} | {o.supports for o in world.objects if o.supports}
    top = [o for o in world.on_table() if o.id not in nested]
    used: set[str] = set()
    clauses = []
    for o in top:
        if o.id in used:
            continue
        used.add(o.id)
        phrase = _noun_phrase(world, o)
        near = [n for n in top if n.id not in used and surface_gap(o, n) < world.params.occlusion_gap]
        if near:
            used.update(n.id for n in near)
            phrase += " next to " + _join([_noun_phrase(world, n) for n in near])
        clauses.append(phrase)
    text = _join(clauses) + " on the table" if clauses else ""
    if world.held is not None:
        holding = "the gripper is holding " + _article(world.obj(world.held).name)
        text = f"{text}; {holding}" if text else holding
    return text or EMPTY_SCENE


def observe(world: WorldState, goal: Goal | None = None, last_effect: Effect | None = None) -> Observation:
    visible = world.on_table()
    return Observation(
        scene_text=describe_world(world),
        objects=tuple(o.name for o in visible),
        masks={o.name: object_mask(world, o) for o in visible},
        grasps={o.name: grasp_hypotheses(world, o) for o in visible},
        held=world.obj(world.held).name if world.held else None,
        dropped=tuple(world.obj(i).name for i in world.dropped_items),
        truth=GroundTruth(world, goal, last_effect),
    )


def grasp_view(world: WorldState, target: SimObject) -> AnnotatedView:
    mask = object_mask(world, target)
    return annotate(mask, candidate_placements(mask, world.params.placement_candidates))


def placement_view(world: WorldState, location: str) -> AnnotatedView | None:
    mask, cands = placement_candidates(world, location)
    return None if cands is None else annotate(mask, cands)


def push_view(world: WorldState, target: SimObject, direction: str) -> AnnotatedView:
    return annotate(object_mask(world, target), push_candidates(world, target, direction), origin=target.position)
