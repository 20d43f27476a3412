"""The interface every model backend implements, one method per role."""

from __future__ import annotations

from abc import ABC, abstractmethod

from expmem.geometry import AnnotatedView
from expmem.sim.observe import Observation
from expmem.stm import StmLedger
from expmem.vlm.types import Action, FeedbackRecord, RetrievedContext


class Backend(ABC):
    """Scene describer, planner, three selectors, success detector and summarizer.

    Selector methods receive the observation alongside the annotated view so
    scripted implementations can consult ground truth; remote ones ignore it.
    """

    name = "backend"

    @abstractmethod
    def describe_scene(self, instruction: str, observation: Observation) -> str: ...

    @abstractmethod
    def plan_action(
        self, instruction: str, observation: Observation, stm: StmLedger, context: RetrievedContext
    ) -> Action: ...

    @abstractmethod
    def choose_grasp_section(self, action: Action, view: AnnotatedView, observation: Observation) -> int: ...

    @abstractmethod
    def choose_placement(self, action: Action, view: AnnotatedView, observation: Observation) -> int: ...

    @abstractmethod
    def choose_push_spot(self, action: Action, view: AnnotatedView, observation: Observation) -> int: ...

    @abstractmethod
    def evaluate_action(self, action: Action, observation: Observation, instruction: str) -> FeedbackRecord: ...

    @abstractmethod
    def summarize_experience(self, stm: StmLedger) -> tuple[str, str | None]:
        """Return (summary paragraph, lesson tag or None)."""
