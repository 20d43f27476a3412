"""Conversion between domain values and function-call arguments."""

from __future__ import annotations

import json
from typing import Any

import jsonschema

from expmem.errors import InvalidInput, ProtocolViolation
from expmem.vlm import schemas
from expmem.vlm.types import Action, FeedbackRecord


def validate_arguments(tool: dict[str, Any], args: Any) -> None:
    """Raise ProtocolViolation unless ``args`` satisfies the tool's parameter schema."""
    params = tool["function"]["parameters"]
    errors = sorted(jsonschema.Draft202012Validator(params).iter_errors(args), key=lambda e: list(e.path))
    if errors:
        detail = "; ".join(e.message for e in errors[:3])
        raise ProtocolViolation(f"{tool['function']['name']} arguments invalid: {detail}")


def action_to_call(action: Action) -> tuple[str, dict[str, Any]]:
    if action.skill == "pick":
        return "pick_object", {
            "scene_description": action.scene_description,
            "reasoning": action.reasoning,
            "target_object": action.target_object,
            "grasp_part": action.grasp_part or "",
            "specific_grasp_required": action.specific_grasp_required,
            "action_description": action.action_description,
        }
    if action.skill == "place":
        return "place_object", {
            "scene_description": action.scene_description,
            "reasoning": action.reasoning,
            "target_object": action.target_object,
            "placement_location": action.placement_location,
            "precise_placement_spot_required": action.precise_placement_spot_required,
            "action_description": action.action_description,
        }
    return "push_object", {
        "scene_description": action.scene_description,
        "reasoning": action.reasoning,
        "object_to_push": action.target_object,
        "push_direction": action.push_direction,
        "action_description": action.action_description,
    }


def action_from_call(name: str, args: Any) -> Action:
    tools = {t["function"]["name"]: t for t in schemas.planner_tools()}
    if name not in tools:
        raise ProtocolViolation(f"unknown planner tool {name!r}")
    validate_arguments(tools[name], args)
    prose = {
        "scene_description": args["scene_description"],
        "reasoning": args["reasoning"],
        "action_description": args["action_description"],
    }
    try:
        if name == "pick_object":
            return Action.pick(
                args["target_object"], grasp_part=args["grasp_part"], specific=args["specific_grasp_required"], **prose
            )
        if name == "place_object":
            return Action.place(
                args["target_object"],
                args["placement_location"],
                precise=args["precise_placement_spot_required"],
                **prose,
            )
        return Action.push(args["object_to_push"], args["push_direction"], **prose)
    except InvalidInput as exc:
        raise ProtocolViolation(f"{name}: {exc}") from exc


def feedback_to_call(fb: FeedbackRecord) -> dict[str, Any]:
    return {
        "reasoning": fb.reasoning,
        "action_status": fb.status,
        "failure_cause": fb.failure_cause,
        "next_step_suggestions": fb.next_step_suggestion,
        "is_task_completed": fb.completed,
    }


def feedback_from_call(args: Any) -> FeedbackRecord:
    validate_arguments(schemas.evaluate_tool(), args)
    try:
        return FeedbackRecord(
            status=args["action_status"],
            failure_cause=args["failure_cause"],
            next_step_suggestion=args["next_step_suggestions"],
            completed=args["is_task_completed"],
            reasoning=args["reasoning"],
        )
    except InvalidInput as exc:
        raise ProtocolViolation(f"evaluate_action_status_and_issues: {exc}") from exc


def tool_calls(body: dict[str, Any]) -> list[tuple[str, Any]]:
    """Extract ``(name, decoded arguments)`` pairs from a chat completion body."""
    try:
        message = body["choices"][0]["message"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProtocolViolation("chat response has no choices[0].message") from exc
    calls = []
    for call in message.get("tool_calls") or []:
        try:
            fn = call["function"]
            name = fn["name"]
            raw = fn["arguments"]
        except (KeyError, TypeError) as exc:
            raise ProtocolViolation("malformed tool call entry") from exc
        try:
            args = json.loads(raw) if isinstance(raw, str) else raw
        except json.JSONDecodeError as exc:
            raise ProtocolViolation(f"tool call {name!r} has non-JSON arguments") from exc
        calls.append((name, args))
    return calls


def single_call(body: dict[str, Any], allowed: tuple[str, ...]) -> tuple[str, Any]:
    calls = tool_calls(body)
    if len(calls) != 1:
        raise ProtocolViolation(f"expected exactly one tool call, got {len(calls)}")
    name, args = calls[0]
    if name not in allowed:
        raise ProtocolViolation(f"unexpected tool {name!r}; expected one of {allowed}")
    return name, args
