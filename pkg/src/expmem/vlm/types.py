"""Values exchanged with the model roles: actions, detector feedback, retrieved context."""

from __future__ import annotations

from dataclasses import dataclass

from expmem.errors import InvalidInput
from expmem.memory import ScenarioKey

SKILLS = ("pick", "place", "push")
STATUSES = ("successful", "uncertain", "failed")
LESSON_TAGS = (
    "push_obstruction_first",
    "use_flat_tool_for_tiny",
    "push_fragile_instead_of_pick",
    "unload_container_before_lift",
    "none",
)
RETRIEVAL_MODES = ("rag", "random_k", "all", "none")


@dataclass(frozen=True)
class Action:
    """One skill instantiation. Only the fields of ``skill`` may be set."""

    skill: str
    target_object: str
    grasp_part: str | None = None
    specific_grasp_required: bool = False
    placement_location: str | None = None
    precise_placement_spot_required: bool = False
    push_direction: str | None = None
    action_description: str = ""
    scene_description: str = ""
    reasoning: str = ""

    def __post_init__(self) -> None:
        if self.skill not in SKILLS:
            raise InvalidInput(f"unknown skill {self.skill!r}")
        if not self.target_object.strip():
            raise InvalidInput("action needs a target object")
        pick_fields = self.grasp_part is not None or self.specific_grasp_required
        place_fields = self.placement_location is not None or self.precise_placement_spot_required
        if self.skill == "pick":
            if self.grasp_part is None or place_fields or self.push_direction is not None:
                raise InvalidInput("pick takes grasp_part/specific_grasp_required only")
        elif self.skill == "place":
            if not self.placement_location or pick_fields or self.push_direction is not None:
                raise InvalidInput("place takes placement_location/precise_placement_spot_required only")
        else:
            if self.push_direction not in ("left", "right") or pick_fields or place_fields:
                raise InvalidInput("push takes push_direction in {left, right} only")

    @classmethod
    def pick(cls, target: str, *, grasp_part: str = "", specific: bool = False, **prose: str) -> Action:
        return cls("pick", target, grasp_part=grasp_part, specific_grasp_required=specific, **prose)

    @classmethod
    def place(cls, target: str, location: str, *, precise: bool = False, **prose: str) -> Action:
        return cls(
            "place", target, placement_location=location, precise_placement_spot_required=precise, **prose
        )

    @classmethod
    def push(cls, target: str, direction: str, **prose: str) -> Action:
        return cls("push", target, push_direction=direction, **prose)

    def call_text(self) -> str:
        if self.skill == "pick":
            return f"pick({self.target_object})"
        if self.skill == "place":
            return f"place({self.target_object}, {self.placement_location})"
        return f"push({self.target_object}, {self.push_direction})"

    def same_call(self, other: Action) -> bool:
        """True when both actions invoke the same skill with the same arguments."""
        return self.call_text() == other.call_text()


@dataclass(frozen=True)
class FeedbackRecord:
    status: str
    failure_cause: str = ""
    next_step_suggestion: str = ""
    completed: bool = False
    reasoning: str = ""

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise InvalidInput(f"status must be one of {STATUSES}, got {self.status!r}")
        if self.completed and self.status == "failed":
            raise InvalidInput("a failed action cannot complete the task")

    @property
    def failed(self) -> bool:
        return self.status == "failed"


@dataclass(frozen=True)
class ContextEntry:
    key: ScenarioKey
    summary: str
    lesson: str | None = None
    record_id: int | None = None


@dataclass(frozen=True)
class RetrievedContext:
    entries: tuple[ContextEntry, ...] = ()
    mode: str = "none"

    def __post_init__(self) -> None:
        if self.mode not in RETRIEVAL_MODES:
            raise InvalidInput(f"unknown retrieval mode {self.mode!r}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def record_ids(self) -> list[int]:
        return [e.record_id for e in self.entries if e.record_id is not None]

    def lessons(self) -> list[str]:
        return [e.lesson for e in self.entries if e.lesson and e.lesson != "none"]
