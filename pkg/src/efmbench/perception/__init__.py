from .camera import CameraSpec, camera_world_pose, default_rig, wrist_pose_for_camera
from .observe import Observation, build_observation, semantic_observation
from .render import decode_png, encode_png, render, render_camera
from .visibility import (
    VISIBILITY_THRESHOLD,
    VisibilityReport,
    ee_visible_fraction,
    point_visible_fraction,
    visibility,
)

__all__ = [
    "CameraSpec",
    "Observation",
    "VISIBILITY_THRESHOLD",
    "VisibilityReport",
    "build_observation",
    "camera_world_pose",
    "decode_png",
    "default_rig",
    "ee_visible_fraction",
    "encode_png",
    "point_visible_fraction",
    "render",
    "render_camera",
    "semantic_observation",
    "visibility",
    "wrist_pose_for_camera",
]
