"""Deterministic 2D tabletop with pick/place/push and constructed failure traps.

World coordinates are raster cell units on a ``raster_w x raster_h`` grid;
every position stays inside ``[0, raster_w-1] x [0, raster_h-1]``. States are
immutable values: ``execute`` returns a new world and never mutates its input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Iterable

import numpy as np

from expmem.errors import InvalidInput, NoFeasibleGrasp
from expmem.geometry import (
    APPROACHES,
    GraspHypothesis,
    Point2,
    RasterMask,
    Reachability,
    candidate_placements,
    candidate_push_endpoints,
    select_grasp,
)
from expmem.vlm.types import Action

EFFECT_KINDS = (
    "ok",
    "grasp_blocked",
    "too_small_contact",
    "cracked",
    "contents_dropped",
    "not_holding",
    "unknown_object",
)
TABLE = "table"

BASE_CONFIDENCE = 0.9
NEIGHBOUR_PENALTY = 0.15
CONFIDENCE_RANGE = (0.05, 0.95)


@dataclass(frozen=True)
class SimParams:
    occlusion_gap: float = 1.5
    gripper_min_contact: float = 0.8
    raster_w: int = 64
    raster_h: int = 48
    push_step: float = 2.0
    push_count: int = 8
    placement_candidates: int = 5
    bump: float = 1.0
    reach: Reachability | None = None

    def __post_init__(self) -> None:
        if self.raster_w < 2 or self.raster_h < 2:
            raise InvalidInput("raster must be at least 2x2")
        if self.push_step <= 0 or self.push_count < 1:
            raise InvalidInput("push_step must be positive and push_count >= 1")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (0.0, 0.0, float(self.raster_w - 1), float(self.raster_h - 1))

    @property
    def diagonal(self) -> float:
        return math.hypot(self.raster_w, self.raster_h)

    def reachability(self) -> Reachability:
        return self.reach or Reachability(self.bounds)


@dataclass(frozen=True)
class SimObject:
    id: str
    name: str
    position: Point2
    extent: float
    fragile: bool = False
    tiny: bool = False
    is_container: bool = False
    contents: tuple[str, ...] = ()
    supports: str | None = None
    flat_tool_face: bool = False
    handle_cell: Point2 | None = None
    cracked: bool = False


@dataclass(frozen=True)
class Effect:
    kind: str
    detail: str = ""
    target: str = ""
    subject: str = ""
    grasp: GraspHypothesis | None = None

    def __post_init__(self) -> None:
        if self.kind not in EFFECT_KINDS:
            raise InvalidInput(f"unknown effect kind {self.kind!r}")

    @property
    def ok(self) -> bool:
        return self.kind == "ok"

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "detail": self.detail, "target": self.target, "subject": self.subject}
        if self.grasp is not None:
            out["grasp"] = {
                "x": self.grasp.position.x,
                "y": self.grasp.position.y,
                "approach": self.grasp.approach_label,
                "confidence": self.grasp.confidence,
            }
        return out


@dataclass(frozen=True)
class WorldState:
    objects: tuple[SimObject, ...]
    params: SimParams = field(default_factory=SimParams)
    held: str | None = None
    dropped_items: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise InvalidInput("object ids must be unique")
        names = [o.name for o in self.objects]
        if len(set(names)) != len(names):
            raise InvalidInput("object names must be unique")
        known = set(ids)
        x0, y0, x1, y1 = self.params.bounds
        for o in self.objects:
            if o.id in o.contents or o.supports == o.id:
                raise InvalidInput(f"{o.name} cannot contain or support itself")
            if not set(o.contents) <= known or (o.supports is not None and o.supports not in known):
                raise InvalidInput(f"{o.name} references an unknown object")
            if o.tiny and o.extent >= self.params.gripper_min_contact:
                raise InvalidInput(f"tiny object {o.name} must be smaller than the gripper contact size")
            if not (x0 <= o.position.x <= x1 and y0 <= o.position.y <= y1):
                raise InvalidInput(f"{o.name} lies outside the table")
        if self.held is not None and self.held not in known:
            raise InvalidInput("held object does not exist")
        if self.held in self.dropped_items or not set(self.dropped_items) <= known:
            raise InvalidInput("dropped items must be known and not held")

    @cached_property
    def _by_id(self) -> dict[str, SimObject]:
        return {o.id: o for o in self.objects}

    def obj(self, object_id: str) -> SimObject:
        return self._by_id[object_id]

    def find(self, name: str) -> SimObject | None:
        wanted = name.strip().lower()
        for o in self.objects:
            if o.name.lower() == wanted or o.id.lower() == wanted:
                return o
        return None

    def on_table(self) -> list[SimObject]:
        gone = set(self.dropped_items)
        return [o for o in self.objects if o.id != self.held and o.id not in gone]

    def container_of(self, object_id: str) -> SimObject | None:
        for o in self.objects:
            if object_id in o.contents:
                return o
        return None

    def supporter_of(self, object_id: str) -> SimObject | None:
        for o in self.objects:
            if o.supports == object_id:
                return o
        return None

    def held_tool(self) -> SimObject | None:
        if self.held is None:
            return None
        o = self.obj(self.held)
        return o if o.flat_tool_face else None

    def _with(self, updates: Iterable[SimObject], **fields) -> WorldState:
        by_id = dict(self._by_id)
        for o in updates:
            by_id[o.id] = o
        return replace(self, objects=tuple(by_id[o.id] for o in self.objects), **fields)


def clamp_point(p: Point2, params: SimParams) -> Point2:
    x0, y0, x1, y1 = params.bounds
    return Point2(min(max(p.x, x0), x1), min(max(p.y, y0), y1))


def surface_gap(a: SimObject, b: SimObject) -> float:
    return a.position.distance(b.position) - a.extent - b.extent


def _related(world: WorldState, a: SimObject, b: SimObject) -> bool:
    """Containment or stacking between ``a`` and ``b`` in either direction."""
    return b.id in a.contents or a.id in b.contents or a.supports == b.id or b.supports == a.id


def blocking_object(world: WorldState, target: SimObject) -> SimObject | None:
    """Nearest on-table object intruding into the target's approach disk."""
    best, best_gap = None, math.inf
    for o in world.on_table():
        if o.id == target.id or _related(world, target, o):
            continue
        gap = surface_gap(o, target)
        if gap < world.params.occlusion_gap and gap < best_gap:
            best, best_gap = o, gap
    return best


def _neighbour_count(world: WorldState, target: SimObject) -> int:
    return sum(
        1
        for o in world.on_table()
        if o.id != target.id and not _related(world, target, o) and surface_gap(o, target) < world.params.occlusion_gap
    )


def grasp_hypotheses(world: WorldState, target: SimObject) -> tuple[GraspHypothesis, ...]:
    """Top and two side grasps; confidence drops with each crowding neighbour."""
    lo, hi = CONFIDENCE_RANGE
    conf = BASE_CONFIDENCE - NEIGHBOUR_PENALTY * _neighbour_count(world, target)
    conf = round(min(max(conf, lo), hi), 10)
    p, e = target.position, target.extent
    spots = {
        "top": p,
        "side-left": clamp_point(Point2(p.x - e, p.y), world.params),
        "side-right": clamp_point(Point2(p.x + e, p.y), world.params),
    }
    return tuple(GraspHypothesis(spots[a], a, conf) for a in APPROACHES)


def object_mask(world: WorldState, target: SimObject) -> RasterMask:
    p = world.params
    return RasterMask.disk(p.raster_w, p.raster_h, target.position, target.extent)


def free_space_mask(world: WorldState, radius: float, ignore: Iterable[str] = ()) -> RasterMask:
    """Cells where a disk of ``radius`` keeps the occlusion gap to every on-table object."""
    p = world.params
    rows, cols = np.mgrid[0 : p.raster_h, 0 : p.raster_w]
    free = np.ones((p.raster_h, p.raster_w), dtype=bool)
    skip = set(ignore)
    for o in world.on_table():
        if o.id in skip:
            continue
        reach = o.extent + radius + p.occlusion_gap
        free &= (cols - o.position.x) ** 2 + (rows - o.position.y) ** 2 >= reach * reach
    return RasterMask.from_grid(free)


def placement_mask(world: WorldState, location: str) -> RasterMask | None:
    """Area in which ``location`` accepts a placed object, or None if unknown."""
    if location.strip().lower() == TABLE:
        held = world.obj(world.held) if world.held else None
        return free_space_mask(world, held.extent if held else 0.5, ignore=[world.held] if held else [])
    loc = world.find(location)
    if loc is None or loc.id in world.dropped_items or loc.id == world.held:
        return None
    return object_mask(world, loc)


def placement_candidates(world: WorldState, location: str):
    mask = placement_mask(world, location)
    if mask is None or mask.count == 0:
        return None, None
    return mask, candidate_placements(mask, world.params.placement_candidates)


def push_candidates(world: WorldState, target: SimObject, direction: str):
    p = world.params
    return candidate_push_endpoints(target.position, direction, p.push_step, p.push_count)


@lru_cache(maxsize=8)
def _ring_offsets(w: int, h: int) -> tuple[tuple[int, int], ...]:
    offs = [(dx, dy) for dy in range(-h, h + 1) for dx in range(-w, w + 1)]
    offs.sort(key=lambda d: (d[0] * d[0] + d[1] * d[1], d[1], d[0]))
    return tuple(offs)


def nearest_free_cell(
    world: WorldState, anchor: Point2, radius: float, clearance: float, ignore: Iterable[str] = ()
) -> Point2:
    """Closest cell to ``anchor`` whose disk keeps ``clearance`` to all on-table objects.

    Falls back to the clamped anchor when the table is full.
    """
    p = world.params
    skip = set(ignore)
    others = [o for o in world.on_table() if o.id not in skip]
    ax, ay = int(round(anchor.x)), int(round(anchor.y))
    x0, y0, x1, y1 = p.bounds
    for dx, dy in _ring_offsets(p.raster_w, p.raster_h):
        cx, cy = ax + dx, ay + dy
        if not (x0 <= cx <= x1 and y0 <= cy <= y1):
            continue
        if all(math.hypot(cx - o.position.x, cy - o.position.y) - o.extent - radius >= clearance for o in others):
            return Point2(float(cx), float(cy))
    return clamp_point(anchor, p)


def _move(world: WorldState, obj: SimObject, new_pos: Point2) -> list[SimObject]:
    """Move ``obj`` and whatever rides on or in it by the same offset."""
    dx, dy = new_pos.x - obj.position.x, new_pos.y - obj.position.y
    moved = [replace(obj, position=new_pos)]
    riders = list(obj.contents) + ([obj.supports] if obj.supports else [])
    for rid in riders:
        r = world.obj(rid)
        moved.append(replace(r, position=clamp_point(Point2(r.position.x + dx, r.position.y + dy), world.params)))
    return moved


def _detach(world: WorldState, obj: SimObject) -> list[SimObject]:
    """Updates that take ``obj`` out of whatever container or stack holds it."""
    out = []
    c = world.container_of(obj.id)
    if c is not None:
        out.append(replace(c, contents=tuple(i for i in c.contents if i != obj.id)))
    s = world.supporter_of(obj.id)
    if s is not None:
        out.append(replace(s, supports=None))
    return out


def execute(world: WorldState, action: Action, selected_label: int | None = None) -> tuple[WorldState, Effect]:
    """Apply one skill. Unknown objects yield an ``unknown_object`` effect, not an exception."""
    if action.skill == "place":
        return _place(world, action, selected_label)
    target = world.find(action.target_object)
    if target is None or target.id in world.dropped_items:
        return world, Effect("unknown_object", f"no {action.target_object} on the table", action.target_object)
    if action.skill == "pick":
        return _pick(world, target, selected_label)
    return _push(world, target, action.push_direction, selected_label)


def _pick(world: WorldState, target: SimObject, label: int | None) -> tuple[WorldState, Effect]:
    p = world.params
    if world.held == target.id:
        return world, Effect("ok", "already holding", target.name)
    if world.held is not None:
        return world, Effect("grasp_blocked", "gripper is occupied", target.name, world.obj(world.held).name)

    blocker = blocking_object(world, target)
    if blocker is not None:
        # the fingers knock the obstruction aside, which perturbs the scene
        dx, dy = blocker.position.x - target.position.x, blocker.position.y - target.position.y
        norm = math.hypot(dx, dy)
        ux, uy = (dx / norm, dy / norm) if norm > 0 else (1.0, 0.0)
        bumped = clamp_point(Point2(blocker.position.x + ux * p.bump, blocker.position.y + uy * p.bump), p)
        return world._with(_move(world, blocker, bumped)), Effect("grasp_blocked", "occluded", target.name, blocker.name)
    if target.fragile:
        return world._with([replace(target, cracked=True)]), Effect("cracked", "cracked while grasping", target.name)
    if target.tiny:
        return world, Effect("grasp_blocked", "too small", target.name)

    chosen = None
    if label is not None:
        chosen = candidate_placements(object_mask(world, target), p.placement_candidates).location(label)
    try:
        grasp = select_grasp(grasp_hypotheses(world, target), p.reachability(), chosen, p.diagonal)
    except NoFeasibleGrasp:
        return world, Effect("grasp_blocked", "no feasible grasp", target.name)

    updates = _detach(world, target)
    world = world._with(updates)
    target = world.obj(target.id)
    if target.is_container and target.contents:
        dropped = target.contents
        names = ", ".join(world.obj(i).name for i in dropped)
        world = world._with([replace(target, contents=())], held=target.id, dropped_items=world.dropped_items + dropped)
        return world, Effect("contents_dropped", "contents fell out", target.name, names, grasp)
    if target.supports is not None:
        top = world.obj(target.supports)
        landing = nearest_free_cell(world, target.position, top.extent, 0.0, ignore=[target.id, top.id])
        world = world._with(
            [replace(target, supports=None), replace(top, position=landing)],
            held=target.id,
            dropped_items=world.dropped_items + (top.id,),
        )
        return world, Effect("contents_dropped", "object on top fell off", target.name, top.name, grasp)
    return world._with([], held=target.id), Effect("ok", "", target.name, "", grasp)


def _place(world: WorldState, action: Action, label: int | None) -> tuple[WorldState, Effect]:
    p = world.params
    if world.held is None:
        return world, Effect("not_holding", "gripper is empty", action.target_object)
    held = world.obj(world.held)
    if world.find(action.target_object) is not held:
        return world, Effect("not_holding", f"gripper holds {held.name}", action.target_object, held.name)
    location = action.placement_location or TABLE
    is_table = location.strip().lower() == TABLE
    dest = None if is_table else world.find(location)
    if not is_table and (dest is None or dest.id in world.dropped_items or dest.id == held.id):
        return world, Effect("unknown_object", f"no {location} to place on", held.name, location)

    if label is not None:
        _, cands = placement_candidates(world, location)
        if cands is None:
            return world, Effect("unknown_object", f"no free spot on {location}", held.name, location)
        spot = cands.location(label)
    elif is_table:
        spot = nearest_free_cell(world, held.position, held.extent, p.occlusion_gap + 0.5, ignore=[held.id])
    elif dest.is_container:
        spot = dest.position
    else:
        spot = nearest_free_cell(world, dest.position, held.extent, 0.0, ignore=[held.id])

    updates = _move(world, held, clamp_point(spot, p))
    if dest is not None and dest.is_container:
        updates.append(replace(dest, contents=dest.contents + (held.id,)))
    return world._with(updates, held=None), Effect("ok", "", held.name, location)


def _push(world: WorldState, target: SimObject, direction: str, label: int | None) -> tuple[WorldState, Effect]:
    if world.held == target.id:
        return world, Effect("grasp_blocked", "object is in the gripper", target.name)
    if target.tiny and world.held_tool() is None:
        return world, Effect("too_small_contact", "insufficient contact", target.name)
    end = clamp_point(push_candidates(world, target, direction).location(label or 1), world.params)
    updates = _detach(world, target)
    world = world._with(updates)
    return world._with(_move(world, world.obj(target.id), end)), Effect("ok", "", target.name)


def postcondition_holds(
    before: WorldState, after: WorldState, action: Action, selected_label: int | None = None
) -> bool:
    """The skill's nominal outcome, judged from the two states alone."""
    target = before.find(action.target_object)
    if target is None or target.id in before.dropped_items:
        return False
    if action.skill == "pick":
        return after.held == target.id and after.dropped_items == before.dropped_items
    if action.skill == "place":
        return before.held == target.id and after.held is None and target.id not in after.dropped_items
    if target.tiny and before.held_tool() is None or before.held == target.id:
        return False
    end = push_candidates(before, target, action.push_direction).location(selected_label or 1)
    return after.obj(target.id).position == clamp_point(end, before.params)


GOAL_TYPES = ("at", "held")


@dataclass(frozen=True)
class Goal:
    """Declarative success condition: ``held(subject)`` or ``subject`` within ``radius`` of ``target``."""

    type: str
    subject: str
    target: str | None = None
    radius: float = 3.0

    def __post_init__(self) -> None:
        if self.type not in GOAL_TYPES:
            raise InvalidInput(f"unknown goal type {self.type!r}")
        if self.type == "at" and not self.target:
            raise InvalidInput("an 'at' goal needs a target")
        if self.radius < 0:
            raise InvalidInput("goal radius must be non-negative")

    def check_refs(self, world: WorldState) -> None:
        for name in (self.subject, self.target):
            if name is not None and world.find(name) is None:
                raise InvalidInput(f"goal references unknown object {name!r}")


def goal_satisfied(world: WorldState, goal: Goal) -> bool:
    if world.dropped_items:
        return False
    subject = world.find(goal.subject)
    if subject is None or subject.cracked:
        return False
    if goal.type == "held":
        return world.held == subject.id
    target = world.find(goal.target)
    on_table = {o.id for o in world.on_table()}
    if subject.id not in on_table or target is None or target.id not in on_table:
        return False
    return subject.position.distance(target.position) <= goal.radius
