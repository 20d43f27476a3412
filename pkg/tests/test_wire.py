from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from expmem.errors import InvalidInput, ProtocolViolation
from expmem.vlm import schemas, wire
from expmem.vlm.types import Action, FeedbackRecord, RetrievedContext

TOOL_NAMES = (
    "describe_scene",
    "pick_object",
    "place_object",
    "push_object",
    "choose_section",
    "choose_location",
    "select_position",
    "evaluate_action_status_and_issues",
    "summarize_robot_experience",
)


@pytest.mark.parametrize("name", TOOL_NAMES)
def test_schema_bytes_match_fixture(name, fixtures_dir):
    expected = (fixtures_dir / "schemas" / f"{name}.json").read_text(encoding="utf-8")
    assert schemas.dumps_tool(schemas.all_tools()[name]) == expected


def test_all_tools_are_strict_functions():
    for tool in schemas.all_tools().values():
        assert tool["type"] == "function"
        assert tool["function"]["strict"] is True
        assert tool["function"]["parameters"]["additionalProperties"] is False


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_selector_enums_follow_option_count(n):
    for build, field in (
        (schemas.choose_section_tool, "grasp_section_number"),
        (schemas.choose_location_tool, "best_placement_location"),
        (schemas.select_position_tool, "gripper_position_number"),
    ):
        props = build(n)["function"]["parameters"]["properties"]
        assert props[field]["enum"] == list(range(1, n + 1))


def test_schema_getters_return_copies():
    t = schemas.evaluate_tool()
    t["function"]["name"] = "mutated"
    assert schemas.evaluate_tool()["function"]["name"] == "evaluate_action_status_and_issues"


# Action


def test_action_field_presence():
    with pytest.raises(InvalidInput):
        Action("pick", "apple", grasp_part="", push_direction="left")
    with pytest.raises(InvalidInput):
        Action("place", "apple")
    with pytest.raises(InvalidInput):
        Action("push", "apple", push_direction="up")
    with pytest.raises(InvalidInput):
        Action("throw", "apple")
    with pytest.raises(InvalidInput):
        Action.pick(" ")


def test_feedback_invariants():
    with pytest.raises(InvalidInput):
        FeedbackRecord("partial")
    with pytest.raises(InvalidInput):
        FeedbackRecord("failed", completed=True)
    assert FeedbackRecord("uncertain", completed=True).completed


def test_retrieved_context_mode_checked():
    with pytest.raises(InvalidInput):
        RetrievedContext(mode="top")


prose = st.text(min_size=0, max_size=30)
names = st.text(alphabet="abcdefghij ", min_size=1, max_size=12).filter(lambda s: s.strip())


@st.composite
def actions(draw):
    kind = draw(st.sampled_from(["pick", "place", "push"]))
    p = {"action_description": draw(prose), "scene_description": draw(prose), "reasoning": draw(prose)}
    target = draw(names)
    if kind == "pick":
        return Action.pick(target, grasp_part=draw(prose), specific=draw(st.booleans()), **p)
    if kind == "place":
        return Action.place(target, draw(names), precise=draw(st.booleans()), **p)
    return Action.push(target, draw(st.sampled_from(["left", "right"])), **p)


@given(actions())
def test_action_round_trip(action):
    name, args = wire.action_to_call(action)
    tool = {t["function"]["name"]: t for t in schemas.planner_tools()}[name]
    wire.validate_arguments(tool, args)
    back = wire.action_from_call(name, json.loads(json.dumps(args)))
    # pick with an empty grasp part is normalised to ""
    assert back == action


@given(
    st.sampled_from(["successful", "uncertain", "failed"]), prose, prose, st.booleans(), prose
)
def test_feedback_round_trip(status, cause, suggestion, completed, reasoning):
    if status == "failed":
        completed = False
    fb = FeedbackRecord(status, cause, suggestion, completed, reasoning)
    args = wire.feedback_to_call(fb)
    wire.validate_arguments(schemas.evaluate_tool(), args)
    assert wire.feedback_from_call(args) == fb


def test_action_from_call_rejects_unknown_tool():
    with pytest.raises(ProtocolViolation):
        wire.action_from_call("grab_object", {})


def test_action_from_call_rejects_missing_field():
    _, args = wire.action_to_call(Action.pick("apple"))
    del args["reasoning"]
    with pytest.raises(ProtocolViolation):
        wire.action_from_call("pick_object", args)


def test_action_from_call_rejects_wrong_type():
    _, args = wire.action_to_call(Action.pick("apple"))
    args["specific_grasp_required"] = "yes"
    with pytest.raises(ProtocolViolation):
        wire.action_from_call("pick_object", args)


def test_action_from_call_rejects_blank_target():
    _, args = wire.action_to_call(Action.pick("apple"))
    args["target_object"] = "  "
    with pytest.raises(ProtocolViolation):
        wire.action_from_call("pick_object", args)


def _body(*calls):
    return {
        "choices": [
            {"message": {"tool_calls": [{"function": {"name": n, "arguments": json.dumps(a)}} for n, a in calls]}}
        ]
    }


def test_single_call_counts():
    with pytest.raises(ProtocolViolation):
        wire.single_call(_body(), ("pick_object",))
    with pytest.raises(ProtocolViolation):
        wire.single_call(_body(("pick_object", {}), ("pick_object", {})), ("pick_object",))
    with pytest.raises(ProtocolViolation):
        wire.single_call(_body(("push_object", {})), ("pick_object",))
    assert wire.single_call(_body(("pick_object", {"a": 1})), ("pick_object",)) == ("pick_object", {"a": 1})


def test_tool_calls_rejects_garbage():
    with pytest.raises(ProtocolViolation):
        wire.tool_calls({})
    with pytest.raises(ProtocolViolation):
        wire.tool_calls({"choices": [{"message": {"tool_calls": [{"function": {"name": "x", "arguments": "{"}}]}}]})
    with pytest.raises(ProtocolViolation):
        wire.tool_calls({"choices": [{"message": {"tool_calls": [{"nope": 1}]}}]})
