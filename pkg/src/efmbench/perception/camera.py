"""Pinhole cameras: one fixed on the head, one on each wrist.

Camera frames: local +z is the optical axis, +x image-right, +y
image-down. Wrist cameras ride the EE at a fixed offset, so pointing the
arm points the camera.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import Pose, look_at_quat
from ..sim.scene import RobotState

HEAD_POSITION = np.array([0.0, -0.50, 0.42])
HEAD_LOOKAT = np.array([0.0, 0.05, 0.04])
WRIST_OFFSET = Pose(np.array([0.0, -0.035, 0.012]))

NEAR_PLANE = 0.015
FAR_PLANE = 3.0


@dataclass(frozen=True)
class CameraSpec:
    name: str
    mount: str  # head_fixed | left_wrist | right_wrist
    pose: Pose  # world pose (head) or rigid offset from the EE (wrist)
    fov_deg: float = 60.0
    width: int = 64
    height: int = 64

    def intrinsics(self) -> dict:
        f = (self.width / 2.0) / np.tan(np.radians(self.fov_deg) / 2.0)
        return {
            "fx": f,
            "fy": f,
            "cx": self.width / 2.0,
            "cy": self.height / 2.0,
            "width": self.width,
            "height": self.height,
            "fov_deg": self.fov_deg,
        }


def default_rig() -> dict:
    head_pose = Pose(HEAD_POSITION, look_at_quat(HEAD_POSITION, HEAD_LOOKAT))
    return {
        "head": CameraSpec("head", "head_fixed", head_pose),
        "left_wrist": CameraSpec("left_wrist", "left_wrist", WRIST_OFFSET),
        "right_wrist": CameraSpec("right_wrist", "right_wrist", WRIST_OFFSET),
    }


def camera_world_pose(spec: CameraSpec, robot: RobotState) -> Pose:
    if spec.mount == "head_fixed":
        return spec.pose
    if spec.mount == "left_wrist":
        return robot.left_ee.compose(spec.pose)
    if spec.mount == "right_wrist":
        return robot.right_ee.compose(spec.pose)
    raise ValueError(f"unknown camera mount {spec.mount!r}")


def wrist_pose_for_camera(spec: CameraSpec, camera_pose: Pose) -> Pose:
    """EE pose that places a wrist camera at the given world pose."""
    return camera_pose.compose(spec.pose.inverse())


def in_frustum(spec: CameraSpec, camera_pose: Pose, points: np.ndarray) -> np.ndarray:
    """Boolean mask: are the world points inside the view frustum."""
    pts = np.atleast_2d(points)
    local = (pts - camera_pose.position) @ camera_pose.rotation()
    z = local[:, 2]
    half_tan = np.tan(np.radians(spec.fov_deg) / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = (
            (z > NEAR_PLANE)
            & (z < FAR_PLANE)
            & (np.abs(local[:, 0]) <= half_tan * z)
            & (np.abs(local[:, 1]) <= half_tan * z)
        )
    return ok


def project(spec: CameraSpec, camera_pose: Pose, points: np.ndarray) -> np.ndarray:
    """Pixel coordinates (u, v) of world points (no clipping)."""
    pts = np.atleast_2d(points)
    local = (pts - camera_pose.position) @ camera_pose.rotation()
    intr = spec.intrinsics()
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr["fx"] * local[:, 0] / local[:, 2] + intr["cx"]
        v = intr["fy"] * local[:, 1] / local[:, 2] + intr["cy"]
    return np.stack([u, v], axis=1)


def pixel_rays(spec: CameraSpec, camera_pose: Pose):
    """Ray directions through every pixel center, world frame, row-major."""
    intr = spec.intrinsics()
    js, is_ = np.meshgrid(np.arange(spec.width), np.arange(spec.height))
    x = (js.ravel() + 0.5 - intr["cx"]) / intr["fx"]
    y = (is_.ravel() + 0.5 - intr["cy"]) / intr["fy"]
    local = np.stack([x, y, np.ones_like(x)], axis=1)
    world = local @ camera_pose.rotation().T
    return world
