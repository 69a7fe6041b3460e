"""Seeded task instantiation: variation draw, scene build, instruction."""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass

import numpy as np

from ..sim import scene as scene_mod
from ..sim.scene import SceneState
from .builders import BUILDERS
from .cards import TaskError, TaskSpec, load_spec

_SLOT_RE = re.compile(r"\[([^\]]+)\]")


def render_instruction(template: str, slots: dict) -> str:
    def sub(m):
        key = m.group(1)
        if key not in slots:
            raise TaskError(f"unfilled instruction slot [{key}]")
        return slots[key]

    out = _SLOT_RE.sub(sub, template)
    if "[" in out:
        raise TaskError(f"instruction not fully resolved: {out!r}")
    return out


@dataclass(frozen=True)
class TaskInstance:
    spec: TaskSpec
    seed: int
    variation_id: int
    instruction: str
    scene: SceneState
    description: dict
    hidden: tuple  # ((body_id, attr), ...)
    info: dict  # body ids and anchors the expert and judge use


def task_rng(task_id: str, seed: int) -> np.random.Generator:
    mix = zlib.crc32(task_id.encode()) & 0xFFFFFFFF
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), mix])))


def instantiate_task(task_id: str, seed: int) -> TaskInstance:
    spec = load_spec(task_id)
    rng = task_rng(task_id, seed)
    variation_id = int(rng.integers(spec.variation_count))
    variation = spec.variations[variation_id]
    description, info, slots = BUILDERS[task_id](variation, rng)
    instruction = render_instruction(spec.instruction_template, slots)
    scene = scene_mod.reset(description, seed)
    return TaskInstance(
        spec=spec,
        seed=int(seed),
        variation_id=variation_id,
        instruction=instruction,
        scene=scene,
        description=description,
        hidden=tuple(scene_mod.hidden_attributes(description)),
        info=info,
    )
