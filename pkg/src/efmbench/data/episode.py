"""In-memory episode container and validation.

Numeric per-frame data is held as float32, exactly what goes to disk, so
an episode round-trips bit-for-bit. A frame row is 49 numbers: step
index, robot state (16), action (16), both wrenches (6+6), and the four
active-view visibility flags.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FRAME_WIDTH = 49
SCHEMA_VERSION = 1
FPS = 10


class EpisodeError(ValueError):
    """Invalid episode content or on-disk layout."""


@dataclass
class Episode:
    task_id: str
    instruction: str
    variation_id: int
    seed: int
    view_mode: str  # none | area | area_ee
    obs_mode: str  # symbolic | pixels
    success: bool
    failure_reason: str
    operating_arm: str
    camera_arm: str
    states: np.ndarray  # (T, 16) float32
    actions: np.ndarray  # (T, 16) float32
    wrench_left: np.ndarray  # (T, 6) float32
    wrench_right: np.ndarray  # (T, 6) float32
    flags: np.ndarray  # (T, 4) float32 booleans
    symbolic: list | None = None  # per frame: {camera: record}
    images: list | None = None  # per frame: {camera: HxWx3 uint8}
    phases: list = field(default_factory=list)
    intrinsics: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION
    fps: int = FPS

    def __post_init__(self):
        for name in ("states", "actions", "wrench_left", "wrench_right", "flags"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.float32))

    @property
    def frame_count(self) -> int:
        return int(self.states.shape[0])

    @property
    def duration_s(self) -> float:
        return self.frame_count / self.fps

    def frame_matrix(self) -> np.ndarray:
        """(T, 49) float32 rows in the on-disk order."""
        t = np.arange(self.frame_count, dtype=np.float32)[:, None]
        return np.hstack(
            [t, self.states, self.actions, self.wrench_left, self.wrench_right, self.flags]
        ).astype(np.float32)

    def numeric_equal(self, other: "Episode") -> bool:
        return (
            np.array_equal(self.frame_matrix(), other.frame_matrix())
            and self.task_id == other.task_id
            and self.instruction == other.instruction
        )


def validate_episode(ep: Episode) -> None:
    """Reject inconsistent or non-finite episodes before anything hits disk."""
    t = ep.frame_count
    if t == 0:
        raise EpisodeError("episode has no frames")
    shapes = {
        "states": (t, 16),
        "actions": (t, 16),
        "wrench_left": (t, 6),
        "wrench_right": (t, 6),
        "flags": (t, 4),
    }
    for name, want in shapes.items():
        arr = getattr(ep, name)
        if arr.shape != want:
            raise EpisodeError(f"{name} has shape {arr.shape}, expected {want}")
        if not np.all(np.isfinite(arr)):
            raise EpisodeError(f"{name} contains non-finite values")
    if ep.fps != FPS:
        raise EpisodeError(f"fps must be {FPS}")
    if ep.schema_version != SCHEMA_VERSION:
        raise EpisodeError(f"unsupported schema_version {ep.schema_version}")
    grip = np.concatenate([ep.states[:, 14:16].ravel(), ep.actions[:, 7], ep.actions[:, 15]])
    if np.any(grip < -1e-6) or np.any(grip > 1 + 1e-6):
        raise EpisodeError("gripper values outside [0, 1]")
    if ep.obs_mode == "symbolic":
        if ep.symbolic is None or len(ep.symbolic) != t:
            raise EpisodeError("symbolic payload missing or wrong length")
    elif ep.obs_mode == "pixels":
        if ep.images is None or len(ep.images) != t:
            raise EpisodeError("image payload missing or wrong length")
    else:
        raise EpisodeError(f"unknown obs_mode {ep.obs_mode!r}")
    for ph in ep.phases:
        if not (0 <= ph["start"] <= ph["end"] < t):
            raise EpisodeError(f"phase range {ph} outside episode")
    # Disk precision guarantee: values quantized to float32 must sit within
    # 6e-5 relative of themselves, which holds by construction (already f32).
    return None
