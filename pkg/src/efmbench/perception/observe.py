"""Symbolic observations and full per-frame observation assembly.

A symbolic record lists, per camera, the objects whose visible surface
fraction clears the threshold, with their poses relative to the camera
perturbed by seeded zero-mean noise. Attributes of objects that stay
below the threshold (a plate hidden in a compartment, a recessed port
marker) simply never enter the record, which is what makes hidden scene
properties hidden.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from ..geometry import Pose
from ..sim.contact import Wrench
from ..sim.scene import SceneState
from .camera import CameraSpec, camera_world_pose
from .render import render
from .visibility import (
    VISIBILITY_THRESHOLD,
    point_visible_fraction,
    visibility_all,
)

OBS_NOISE_SIGMA = 0.002  # meters


def _noise_rng(seed: int, camera: str, body_id: str) -> np.random.Generator:
    mix = zlib.crc32(f"{seed}|{camera}|{body_id}".encode()) & 0xFFFFFFFF
    return np.random.Generator(np.random.PCG64(mix))


def _shape_tag(body) -> str:
    prim = body.parts[0][1]
    return type(prim).__name__.replace("Shape", "").lower()


def semantic_observation(
    spec: CameraSpec,
    state: SceneState,
    noise_seed: int = 0,
    sigma: float = OBS_NOISE_SIGMA,
    threshold: float = VISIBILITY_THRESHOLD,
    camera_pose: Pose | None = None,
) -> dict:
    """Per-camera symbolic record of sufficiently visible objects."""
    cam_pose = camera_pose if camera_pose is not None else camera_world_pose(spec, state.robot)
    inv = cam_pose.inverse()
    fractions = visibility_all(spec, cam_pose, state)
    objects = []
    for body in state.bodies:
        frac = fractions[body.id]
        if frac < threshold:
            continue
        rel = inv.compose(state.poses[body.id])
        pos = rel.position.copy()
        if sigma > 0.0:
            pos = pos + _noise_rng(noise_seed, spec.name, body.id).normal(0.0, sigma, size=3)
        objects.append(
            {
                "id": body.id,
                "shape": _shape_tag(body),
                "color": body.color,
                "pos": [round(float(x), 6) for x in pos],
                "quat": [round(float(x), 6) for x in rel.quat],
                "frac": round(frac, 4),
            }
        )
    sockets = []
    for body in state.bodies:
        for s in body.sockets:
            mouth = state.poses[body.id].transform_point(s.mouth)
            probe = mouth + np.array([0.0, 0.0, 0.004])
            frac = point_visible_fraction(
                spec, cam_pose, probe, state, exclude=frozenset([body.id])
            )
            if frac < threshold:
                continue
            rel = inv.transform_point(mouth)
            if sigma > 0.0:
                rel = rel + _noise_rng(noise_seed, spec.name, f"{body.id}:{s.name}").normal(
                    0.0, sigma, size=3
                )
            sockets.append(
                {
                    "id": f"{body.id}:{s.name}",
                    "kind": "socket",
                    "pos": [round(float(x), 6) for x in rel],
                }
            )
    return {"camera": spec.name, "objects": objects, "sockets": sockets}


@dataclass
class Observation:
    """Everything a policy sees at one step."""

    state: np.ndarray  # 16 robot-state numbers
    wrench_left: np.ndarray  # 6
    wrench_right: np.ndarray  # 6
    instruction: str
    symbolic: dict | None = None  # camera name -> record
    images: dict | None = None  # camera name -> RGB uint8 array


def build_observation(
    state: SceneState,
    cameras: dict,
    wrench_left: Wrench,
    wrench_right: Wrench,
    instruction: str,
    obs_mode: str = "symbolic",
    noise_seed: int = 0,
) -> Observation:
    symbolic = None
    images = None
    if obs_mode == "symbolic":
        symbolic = {
            name: semantic_observation(spec, state, noise_seed=noise_seed)
            for name, spec in cameras.items()
        }
    elif obs_mode == "pixels":
        images = {
            name: render(spec, camera_world_pose(spec, state.robot), state)
            for name, spec in cameras.items()
        }
    else:
        raise ValueError(f"unknown obs mode {obs_mode!r}")
    return Observation(
        state=state.robot.to_array(),
        wrench_left=wrench_left.to_array(),
        wrench_right=wrench_right.to_array(),
        instruction=instruction,
        symbolic=symbolic,
        images=images,
    )
