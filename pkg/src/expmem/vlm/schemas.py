"""Function-calling tool definitions for the model roles.

These dicts are sent verbatim in the ``tools`` array of chat requests; key
order and wording are part of the wire contract.
"""

from __future__ import annotations

import copy
import json
from typing import Any

_DESCRIBE_SCENE = {
    "type": "function",
    "function": {
        "name": "describe_scene",
        "description": "Provide a brief description of the environment surrounding the target object.",
        "strict": True,
        "parameters": {
            "type": "object",
            "properties": {
                "reasoning": {
                    "type": "string",
                    "description": "Describe what was observed in the image to generate the scene description.",
                },
                "scene_description": {
                    "type": "string",
                    "description": "A brief summary of the scene, focusing on relevant spatial relationships.",
                },
            },
            "required": ["reasoning", "scene_description"],
            "additionalProperties": False,
        },
    },
}

_ACTION_DESCRIPTION = {
    "type": "string",
    "description": "Briefly describe the action to be performed, focusing only on what the robot should do.",
}
_REASONING = {"type": "string", "description": "Provide reasoning for each parameter choice."}

_PICK_OBJECT = {
    "type": "function",
    "function": {
        "name": "pick_object",
        "description": "Pick a specified object, providing details about the grasping area and surrounding environment.",
        "strict": True,
        "parameters": {
            "type": "object",
            "properties": {
                "scene_description": {
                    "type": "string",
                    "description": "Short description of the object's surroundings, especially the spatial relationships with nearby objects.",
                },
                "reasoning": _REASONING,
                "target_object": {
                    "type": "string",
                    "description": "Specify the object the robot should pick.",
                },
                "grasp_part": {
                    "type": "string",
                    "description": "Specify the part of the object to be grasped. Leave blank if no commonly recognized specific part is relevant to the action.",
                },
                "specific_grasp_required": {
                    "type": "boolean",
                    "description": "Indicate whether the object must be grasped at a specific section to ensure a stable and proper grasp.",
                },
                "action_description": _ACTION_DESCRIPTION,
            },
            "required": [
                "scene_description",
                "reasoning",
                "target_object",
                "grasp_part",
                "specific_grasp_required",
                "action_description",
            ],
            "additionalProperties": False,
        },
    },
}

_PLACE_OBJECT = {
    "type": "function",
    "function": {
        "name": "place_object",
        "description": "Place a specified object at a designated location, including context about positioning and the surrounding environment.",
        "strict": True,
        "parameters": {
            "type": "object",
            "properties": {
                "scene_description": {
                    "type": "string",
                    "description": "Detailed description of the surroundings where the object will be placed, including nearby objects and obstacles.",
                },
                "reasoning": _REASONING,
                "target_object": {
                    "type": "string",
                    "description": "Specify the name or type of the object that the robot should place.",
                },
                "placement_location": {
                    "type": "string",
                    "description": "The specific name of the location where the robot should place the object.",
                },
                "precise_placement_spot_required": {
                    "type": "boolean",
                    "description": "Indicate whether the object must be placed in a specific spot within the placement area.",
                },
                "action_description": _ACTION_DESCRIPTION,
            },
            "required": [
                "scene_description",
                "reasoning",
                "target_object",
                "placement_location",
                "precise_placement_spot_required",
                "action_description",
            ],
            "additionalProperties": False,
        },
    },
}

_PUSH_OBJECT = {
    "type": "function",
    "function": {
        "name": "push_object",
        "description": "Push the specified object by the minimum required distance.",
        "strict": True,
        "parameters": {
            "type": "object",
            "properties": {
                "scene_description": {
                    "type": "string",
                    "description": "Detailed description of the scene, including spatial relationships with nearby objects. Also describe the object's location in the image frame (e.g., left or right side).",
                },
                "reasoning": _REASONING,
                "object_to_push": {
                    "type": "string",
                    "description": "Specify the object to be pushed by the robot's gripper.",
                },
                "push_direction": {
                    "type": "string",
                    "enum": ["left", "right"],
                    "description": "The direction in which to push the object in the image view.",
                },
                "action_description": _ACTION_DESCRIPTION,
            },
            "required": ["scene_description", "reasoning", "object_to_push", "push_direction", "action_description"],
            "additionalProperties": False,
        },
    },
}


def _selector(name: str, description: str, reasoning: str, desc_field: tuple[str, str],
              number_field: tuple[str, str], n: int) -> dict[str, Any]:
    return {
        "type": "function",
        "function": {
            "name": name,
            "description": description,
            "strict": True,
            "parameters": {
                "type": "object",
                "properties": {
                    "reasoning": {"type": "string", "description": reasoning},
                    desc_field[0]: {"type": "string", "description": desc_field[1]},
                    number_field[0]: {
                        "type": "integer",
                        "enum": [i + 1 for i in range(n)],
                        "description": number_field[1],
                    },
                },
                "required": ["reasoning", desc_field[0], number_field[0]],
                "additionalProperties": False,
            },
        },
    }


def choose_section_tool(n: int) -> dict[str, Any]:
    return _selector(
        "choose_section",
        "Select the most stable and effective section of the object to grasp in order to perform the action.",
        "Explain the rationale behind selecting the chosen section.",
        ("object_part_description", "Describe each numbered section and the corresponding part of the object."),
        ("grasp_section_number", "Choose the number corresponding to the best section for grasping the target object."),
        n,
    )


def choose_location_tool(n: int) -> dict[str, Any]:
    return _selector(
        "choose_location",
        "Select the most stable and effective location to place the object in order to fulfill the task.",
        "Explain the rationale behind selecting each location, focusing on stability, accessibility, and suitability for the task.",
        ("placement_spot_description", "Describe each numbered option and its corresponding placement spot."),
        ("best_placement_location", "Choose the number corresponding to the most suitable placement location for the object."),
        n,
    )


def select_position_tool(n: int) -> dict[str, Any]:
    return _selector(
        "select_position",
        "Select the most effective final gripper position to successfully complete the action while minimizing unnecessary movement.",
        "Explain the rationale behind selecting the final gripper position.",
        ("gripper_position_description", "A list of descriptions corresponding to each possible gripper position."),
        ("gripper_position_number", "Select the number corresponding to the optimal final gripper position to complete the task."),
        n,
    )


_EVALUATE = {
    "type": "function",
    "function": {
        "name": "evaluate_action_status_and_issues",
        "description": "Evaluate whether the current action or task was successfully completed, and identify any issues that may impact the task's overall feasibility.",
        "strict": True,
        "parameters": {
            "type": "object",
            "properties": {
                "reasoning": {
                    "type": "string",
                    "description": "Provide a brief explanation of the reasoning behind the action status and issue identification.",
                },
                "action_status": {
                    "type": "string",
                    "enum": ["successful", "uncertain", "failed"],
                    "description": "Indicate whether the current action was completed successfully, failed, or had an uncertain outcome.",
                },
                "failure_cause": {
                    "type": "string",
                    "description": "Provide one short, specific reason for the action's outcome.",
                },
                "next_step_suggestions": {
                    "type": "string",
                    "description": "Provide one short and specific suggestion for the next action needed to fulfill the task.",
                },
                "is_task_completed": {
                    "type": "boolean",
                    "description": "Set to true if the task has been successfully completed, that is, if the intended result has been achieved.",
                },
            },
            "required": ["reasoning", "action_status", "failure_cause", "next_step_suggestions", "is_task_completed"],
            "additionalProperties": False,
        },
    },
}

_SUMMARIZE = {
    "type": "function",
    "function": {
        "name": "summarize_robot_experience",
        "description": (
            "Summarize the robot's short-term experience in a paragraph using the given memory logs. "
            "Include reflections if the robot learned or adjusted its behavior, or any human observations."
        ),
        "strict": True,
        "parameters": {
            "type": "object",
            "properties": {
                "summary": {
                    "type": "string",
                    "description": (
                        "A paragraph summarizing the sequence of actions from the given memory log, "
                        "including any failures, adjustments made by the robot, or observations by the operator."
                    ),
                }
            },
            "required": ["summary"],
            "additionalProperties": False,
        },
    },
}

PLANNER_TOOL_NAMES = ("pick_object", "place_object", "push_object")


def describe_scene_tool() -> dict[str, Any]:
    return copy.deepcopy(_DESCRIBE_SCENE)


def planner_tools() -> list[dict[str, Any]]:
    return copy.deepcopy([_PICK_OBJECT, _PLACE_OBJECT, _PUSH_OBJECT])


def evaluate_tool() -> dict[str, Any]:
    return copy.deepcopy(_EVALUATE)


def summarize_tool() -> dict[str, Any]:
    return copy.deepcopy(_SUMMARIZE)


def all_tools(n_options: int = 3) -> dict[str, dict[str, Any]]:
    tools = [describe_scene_tool(), *planner_tools(), choose_section_tool(n_options),
             choose_location_tool(n_options), select_position_tool(n_options), evaluate_tool(), summarize_tool()]
    return {t["function"]["name"]: t for t in tools}


def dumps_tool(tool: dict[str, Any]) -> str:
    return json.dumps(tool, indent=4, ensure_ascii=False) + "\n"
