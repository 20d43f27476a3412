"""OpenAI-compatible chat-completions client for the model roles.

Observations go out as text (scene summary plus object list); the selectors
additionally get the numbered candidate list. Every reply must contain exactly
one call to the expected function with schema-valid arguments.
"""

from __future__ import annotations

import logging
import threading
import time
from typing import Any, Callable

import httpx

from expmem import _http
from expmem.errors import InvalidInput, ProtocolViolation
from expmem.geometry import AnnotatedView
from expmem.sim.observe import Observation
from expmem.stm import StmLedger
from expmem.vlm import prompts, schemas, wire
from expmem.vlm.backend import Backend
from expmem.vlm.types import Action, FeedbackRecord, RetrievedContext

logger = logging.getLogger(__name__)

DEFAULT_CHAT_MODEL = "gpt-4o"

Exchange = Callable[[dict[str, Any], dict[str, Any]], None]


def _forced(name: str) -> dict[str, Any]:
    return {"type": "function", "function": {"name": name}}


class RemoteBackend(Backend):
    name = "remote"

    def __init__(
        self,
        base_url: str | None = None,
        model: str = DEFAULT_CHAT_MODEL,
        api_key: str | None = None,
        client: httpx.Client | None = None,
        timeout: float = _http.DEFAULT_TIMEOUT,
        attempts: int = _http.DEFAULT_ATTEMPTS,
        backoff: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
        recorder: Exchange | None = None,
    ) -> None:
        self.base_url = _http.resolve_base_url(base_url)
        self.model = model
        self._headers = _http.auth_headers(api_key)
        self._client = client or httpx.Client(timeout=timeout)
        self._attempts = attempts
        self._backoff = backoff
        self._sleep = sleep
        self._recorder = recorder
        self._record_lock = threading.Lock()

    def _chat(self, system: str, user: str, tools: list[dict[str, Any]], tool_choice: Any) -> dict[str, Any]:
        payload = {
            "model": self.model,
            "messages": [{"role": "system", "content": system}, {"role": "user", "content": user}],
            "tools": tools,
            "tool_choice": tool_choice,
        }
        body = _http.post_json(
            self._client,
            f"{self.base_url}/v1/chat/completions",
            payload,
            self._headers,
            attempts=self._attempts,
            backoff=self._backoff,
            sleep=self._sleep,
        )
        if self._recorder is not None:
            with self._record_lock:
                self._recorder(payload, body)
        return body

    def _call_one(self, system: str, user: str, tool: dict[str, Any]) -> dict[str, Any]:
        name = tool["function"]["name"]
        body = self._chat(system, user, [tool], _forced(name))
        _, args = wire.single_call(body, (name,))
        wire.validate_arguments(tool, args)
        return args

    def describe_scene(self, instruction: str, observation: Observation) -> str:
        system = prompts.SCENE_DESCRIBER.format(instruction=instruction)
        args = self._call_one(system, observation.to_text(), schemas.describe_scene_tool())
        text = args["scene_description"].strip()
        if not text:
            raise ProtocolViolation("describe_scene returned an empty description")
        return text

    def plan_action(
        self, instruction: str, observation: Observation, stm: StmLedger, context: RetrievedContext
    ) -> Action:
        if not instruction.strip():
            raise InvalidInput("instruction must not be empty")
        system = prompts.ACTION_PLANNER.format(
            instruction=instruction,
            short_term_memory=stm.render(),
            long_term_memory=prompts.render_long_term_memory(context.entries),
        )
        body = self._chat(system, observation.to_text(), schemas.planner_tools(), "required")
        name, args = wire.single_call(body, schemas.PLANNER_TOOL_NAMES)
        return wire.action_from_call(name, args)

    def _select(self, template: str, tool: dict[str, Any], field: str, action: Action, view: AnnotatedView) -> int:
        if not view.labels:
            raise InvalidInput("annotated view has no candidates")
        system = template.format(action=action.action_description or action.call_text())
        args = self._call_one(system, view.render_text(), tool)
        label = args[field]
        if label not in view.labels:
            raise ProtocolViolation(f"{field}={label} is not one of {view.labels}")
        return label

    def choose_grasp_section(self, action: Action, view: AnnotatedView, observation: Observation) -> int:
        tool = schemas.choose_section_tool(len(view.labels))
        return self._select(prompts.GRASP_SELECTOR, tool, "grasp_section_number", action, view)

    def choose_placement(self, action: Action, view: AnnotatedView, observation: Observation) -> int:
        tool = schemas.choose_location_tool(len(view.labels))
        return self._select(prompts.PLACEMENT_SELECTOR, tool, "best_placement_location", action, view)

    def choose_push_spot(self, action: Action, view: AnnotatedView, observation: Observation) -> int:
        tool = schemas.select_position_tool(len(view.labels))
        return self._select(prompts.PUSH_SELECTOR, tool, "gripper_position_number", action, view)

    def evaluate_action(self, action: Action, observation: Observation, instruction: str) -> FeedbackRecord:
        system = prompts.SUCCESS_DETECTOR.format(action=action.call_text(), instruction=instruction)
        args = self._call_one(system, observation.to_text(), schemas.evaluate_tool())
        return wire.feedback_from_call(args)

    def summarize_experience(self, stm: StmLedger) -> tuple[str, str | None]:
        if not stm.entries:
            raise InvalidInput("cannot summarize an empty short-term memory")
        system = prompts.EXPERIENCE_SUMMARIZER.format(short_term_memory=stm.render())
        args = self._call_one(system, "Summarize the log above.", schemas.summarize_tool())
        return args["summary"], None
