"""Scenario files: one YAML document per task configuration."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from expmem.errors import InvalidInput
from expmem.geometry import Point2
from expmem.sim.world import Goal, SimObject, SimParams, WorldState, blocking_object
from expmem.vlm.types import LESSON_TAGS

SCENARIO_GROUPS = ("stm", "ltm")
_FLAGS = {"fragile", "tiny", "container", "flat_tool"}


@dataclass(frozen=True)
class Scenario:
    name: str
    instruction: str
    attempts_allowed: int
    trap: str
    goal: Goal
    initial_world: WorldState
    operator_notes: tuple[tuple[int, str], ...] = ()
    source: str = ""

    def __post_init__(self) -> None:
        if not self.instruction.strip():
            raise InvalidInput(f"scenario {self.name}: empty instruction")
        if self.attempts_allowed < 1:
            raise InvalidInput(f"scenario {self.name}: attempts_allowed must be >= 1")
        if self.trap not in LESSON_TAGS:
            raise InvalidInput(f"scenario {self.name}: unknown trap {self.trap!r}")
        self.goal.check_refs(self.initial_world)


def reset(scenario: Scenario) -> WorldState:
    """The full initial state: positions, contents and object condition."""
    return scenario.initial_world


def _object_id(name: str) -> str:
    return re.sub(r"\W+", "_", name.strip().lower())


def _point(data: Any, what: str) -> Point2:
    try:
        return Point2(float(data["x"]), float(data["y"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"{what} needs numeric x and y") from exc


def scenario_from_dict(data: dict[str, Any], source: str = "") -> Scenario:
    try:
        raw_params = dict(data.get("params") or {})
        raster = raw_params.pop("raster", None) or {}
        params = SimParams(
            raster_w=int(raster.get("w", SimParams.raster_w)),
            raster_h=int(raster.get("h", SimParams.raster_h)),
            **{k: v for k, v in raw_params.items()},
        )
        objects = []
        for entry in data["objects"]:
            flags = set(entry.get("flags") or [])
            if flags - _FLAGS:
                raise InvalidInput(f"unknown flags {sorted(flags - _FLAGS)} on {entry['name']}")
            objects.append(
                SimObject(
                    id=_object_id(entry["name"]),
                    name=entry["name"],
                    position=_point(entry, entry["name"]),
                    extent=float(entry["extent"]),
                    fragile="fragile" in flags,
                    tiny="tiny" in flags,
                    is_container="container" in flags,
                    contents=tuple(_object_id(n) for n in entry.get("contents") or ()),
                    supports=_object_id(entry["supports"]) if entry.get("supports") else None,
                    flat_tool_face="flat_tool" in flags,
                    handle_cell=_point(entry["handle"], "handle") if entry.get("handle") else None,
                )
            )
        world = WorldState(tuple(objects), params)
        g = data["goal"]
        goal = Goal(g["type"], g["subject"], g.get("target"), float(g.get("radius", 3.0)))
        notes = tuple((int(n["step"]), str(n["text"])) for n in data.get("operator_notes") or ())
        return Scenario(
            name=data["name"],
            instruction=data["instruction"],
            attempts_allowed=int(data.get("attempts_allowed", 1)),
            trap=data.get("trap", "none"),
            goal=goal,
            initial_world=world,
            operator_notes=notes,
            source=source,
        )
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"malformed scenario {source or '<dict>'}: {exc!r}") from exc


def _stem(file_name: str) -> str:
    # files carry a numeric prefix that fixes table order
    return re.sub(r"^\d+_", "", file_name.removesuffix(".yaml"))


def _scenario_dir():
    return resources.files("expmem.sim") / "scenarios"


def load_scenario(ref: str | Path) -> Scenario:
    """Load from a file path, or from a bundled name such as ``stm/apple_plate_container``."""
    path = Path(ref)
    if path.is_file():
        text, source = path.read_text(encoding="utf-8"), str(path)
    else:
        text, source = None, str(ref)
        group, _, name = str(ref).partition("/")
        if group in SCENARIO_GROUPS and name:
            for entry in _scenario_dir().joinpath(group).iterdir():
                if entry.name.endswith(".yaml") and _stem(entry.name) == name:
                    text = entry.read_text(encoding="utf-8")
                    break
        if text is None:
            raise FileNotFoundError(f"no scenario file or bundled scenario named {ref}")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidInput(f"{source}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidInput(f"{source}: expected a mapping")
    return scenario_from_dict(data, source)


def bundled_scenarios(group: str) -> list[Scenario]:
    if group not in SCENARIO_GROUPS:
        raise InvalidInput(f"unknown scenario group {group!r}")
    entries = sorted(e.name for e in _scenario_dir().joinpath(group).iterdir() if e.name.endswith(".yaml"))
    return [load_scenario(f"{group}/{_stem(n)}") for n in entries]


def corrective_action(scenario: Scenario) -> tuple[str, str]:
    """(skill, object) of the first step that sidesteps the scenario's trap."""
    world = scenario.initial_world
    subject = world.find(scenario.goal.subject)
    trap = scenario.trap
    if trap == "push_obstruction_first":
        blocker = blocking_object(world, subject)
        if blocker is not None:
            return "push", blocker.name
    elif trap == "use_flat_tool_for_tiny":
        tools = [o for o in world.on_table() if o.flat_tool_face]
        if tools:
            tool = min(tools, key=lambda o: o.position.distance(subject.position))
            return "pick", tool.name
    elif trap == "push_fragile_instead_of_pick":
        return "push", subject.name
    elif trap == "unload_container_before_lift":
        cargo = list(subject.contents) + ([subject.supports] if subject.supports else [])
        if cargo:
            return "pick", world.obj(cargo[0]).name
    return "pick", subject.name
