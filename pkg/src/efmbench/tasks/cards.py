"""Task cards: the shipped per-task documents (instruction template,
variation table, thresholds, time limit, arm roles)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

TASK_IDS = (
    "toy_find",
    "toy_match",
    "cup_hang",
    "cup_place",
    "box_push",
    "light_plug",
    "bread_brush",
    "nail_knock",
    "cable_match",
    "charger_plug",
)

CATEGORIES = (
    "semantic_exploration",
    "occlusion_exploration",
    "delicate_focus",
    "exploration_and_focus",
)


class TaskError(ValueError):
    """Unknown task or malformed card."""


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    name: str
    category: str
    variation_count: int
    instruction_template: str
    time_limit_steps: int
    operating_arm: str
    camera_arm: str
    handover: bool
    variations: tuple
    thresholds: dict
    distractors: dict

    @staticmethod
    def from_card(card: dict) -> "TaskSpec":
        spec = TaskSpec(
            task_id=card["task_id"],
            name=card["name"],
            category=card["category"],
            variation_count=card["variation_count"],
            instruction_template=card["instruction_template"],
            time_limit_steps=card["time_limit_steps"],
            operating_arm=card["operating_arm"],
            camera_arm=card["camera_arm"],
            handover=card["handover"],
            variations=tuple(card["variations"]),
            thresholds=card["thresholds"],
            distractors=card["distractors"],
        )
        if spec.category not in CATEGORIES:
            raise TaskError(f"{spec.task_id}: unknown category {spec.category!r}")
        if spec.variation_count != len(spec.variations):
            raise TaskError(f"{spec.task_id}: variation_count does not match the table")
        return spec


def load_card(task_id: str) -> dict:
    if task_id not in TASK_IDS:
        raise TaskError(f"unknown task {task_id!r} (known: {', '.join(TASK_IDS)})")
    path = resources.files("efmbench.tasks").joinpath(f"cards/{task_id}.json")
    return json.loads(path.read_text())


def load_spec(task_id: str) -> TaskSpec:
    return TaskSpec.from_card(load_card(task_id))


def all_specs() -> dict:
    return {tid: load_spec(tid) for tid in TASK_IDS}
