"""Line-of-sight queries: frustum tests plus first-hit ray casts from the
camera center to sampled target surface points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Pose
from ..sim.scene import SceneError, SceneState
from .camera import NEAR_PLANE, CameraSpec, in_frustum

VISIBILITY_THRESHOLD = 0.5

# Fixed probe pattern for point/EE queries: center plus an octahedron.
_SPHERE_DIRS = np.array(
    [
        [0, 0, 0],
        [1, 0, 0],
        [-1, 0, 0],
        [0, 1, 0],
        [0, -1, 0],
        [0, 0, 1],
        [0, 0, -1],
        [0.577, 0.577, 0.577],
        [-0.577, -0.577, 0.577],
    ]
)


@dataclass(frozen=True)
class VisibilityReport:
    target_id: str
    in_frustum: bool
    occluded: bool
    occluder_id: str | None
    fraction_visible: float


def _blocked(state: SceneState, camera_pos: np.ndarray, points: np.ndarray, exclude: frozenset):
    """For each point: is the segment camera->point interrupted, and by whom."""
    parts = state.world_parts(exclude=exclude, colliders_only=True)
    n = len(points)
    if parts.n == 0:
        return np.zeros(n, dtype=bool), np.full(n, -1, dtype=np.int64)
    dirs = points - camera_pos
    origins = np.broadcast_to(camera_pos, (n, 3))
    t = parts.raycast_matrix(origins, dirs)
    # A hit strictly before the sample point blocks it (tiny slack for
    # points lying exactly on a surface).
    mask = t < (1.0 - 1e-6)
    mask &= t > 1e-9
    any_block = mask.any(axis=1)
    first = np.where(any_block, np.argmin(np.where(mask, t, np.inf), axis=1), -1)
    owner = np.full(n, -1, dtype=np.int64)
    ok = first >= 0
    owner[ok] = parts.owners[first[ok]]
    return any_block, owner


def visibility(
    spec: CameraSpec,
    camera_pose: Pose,
    target_id: str,
    state: SceneState,
) -> VisibilityReport:
    """Fraction of sampled target surface points that are in the frustum
    and reachable from the camera center without crossing other geometry.

    The target's own surface never occludes itself.
    """
    if not state.has_body(target_id):
        raise SceneError(f"unknown visibility target {target_id!r}")
    body = state.body(target_id)
    pts = state.poses[target_id].transform_points(body.surface_local)
    frustum = in_frustum(spec, camera_pose, pts)
    blocked, owner = _blocked(state, camera_pose.position, pts, frozenset([target_id]))
    visible = frustum & ~blocked
    fraction = float(np.count_nonzero(visible)) / len(pts)
    occluding = frustum & blocked
    occluder_id = None
    if np.any(occluding):
        hits = owner[occluding]
        hits = hits[hits >= 0]
        if len(hits):
            counts = np.bincount(hits, minlength=len(state.bodies))
            occluder_id = state.bodies[int(np.argmax(counts))].id
    return VisibilityReport(
        target_id=target_id,
        in_frustum=bool(np.any(frustum)),
        occluded=bool(np.any(occluding)),
        occluder_id=occluder_id,
        fraction_visible=fraction,
    )


def visibility_all(spec: CameraSpec, camera_pose: Pose, state: SceneState) -> dict:
    """Visible fractions of every body from one camera, in one batched cast.

    Equivalent to calling ``visibility`` per body (same sample points, same
    occlusion rule) but casts all rays against all parts at once.
    Returns body id -> fraction_visible.
    """
    bodies = state.bodies
    if not bodies:
        return {}
    pts = []
    owner_of_ray = []
    for i, b in enumerate(bodies):
        w = state.poses[b.id].transform_points(b.surface_local)
        pts.append(w)
        owner_of_ray.append(np.full(len(w), i, dtype=np.int64))
    pts = np.vstack(pts)
    ray_owner = np.concatenate(owner_of_ray)
    frustum = in_frustum(spec, camera_pose, pts)
    parts = state.world_parts(exclude=frozenset(), colliders_only=True)
    if parts.n:
        origins = np.broadcast_to(camera_pose.position, (len(pts), 3))
        t = parts.raycast_matrix(origins, pts - camera_pose.position)
        # Ignore intersections with the ray's own target body.
        same = parts.owners[None, :] == ray_owner[:, None]
        t = np.where(same, np.inf, t)
        blocked = np.any((t < 1.0 - 1e-6) & (t > 1e-9), axis=1)
    else:
        blocked = np.zeros(len(pts), dtype=bool)
    visible = frustum & ~blocked
    out = {}
    cursor = 0
    for b in bodies:
        k = len(b.surface_local)
        out[b.id] = float(np.count_nonzero(visible[cursor : cursor + k])) / k
        cursor += k
    return out


def point_visible_fraction(
    spec: CameraSpec,
    camera_pose: Pose,
    point: np.ndarray,
    state: SceneState,
    probe_radius: float = 0.006,
    exclude: frozenset = frozenset(),
) -> float:
    """Visibility fraction of a small probe sphere around a 3D point."""
    pts = np.asarray(point, dtype=np.float64) + _SPHERE_DIRS * probe_radius
    frustum = in_frustum(spec, camera_pose, pts)
    blocked, _ = _blocked(state, camera_pose.position, pts, exclude)
    return float(np.count_nonzero(frustum & ~blocked)) / len(pts)


def point_in_frustum(spec: CameraSpec, camera_pose: Pose, point: np.ndarray) -> bool:
    return bool(in_frustum(spec, camera_pose, np.asarray(point)[None, :])[0])


# The visible part of the gripper sits this far up the tool axis from the
# contact tip (a held object hides the tip itself, not the knuckle).
EE_PROBE_BACKOFF = 0.024


def ee_probe_center(ee_pose: Pose) -> np.ndarray:
    return ee_pose.transform_point(np.array([0.0, 0.0, -EE_PROBE_BACKOFF]))


def ee_visible_fraction(
    spec: CameraSpec,
    camera_pose: Pose,
    ee_pose: Pose,
    state: SceneState,
    tip_radius: float = 0.010,
) -> float:
    """Visibility fraction of the gripper knuckle sphere."""
    pts = ee_probe_center(ee_pose) + _SPHERE_DIRS * tip_radius
    frustum = in_frustum(spec, camera_pose, pts)
    blocked, _ = _blocked(state, camera_pose.position, pts, frozenset())
    return float(np.count_nonzero(frustum & ~blocked)) / len(pts)


def camera_clear_of_scene(camera_pos: np.ndarray, state: SceneState, margin: float) -> bool:
    """True when the camera center keeps the given clearance from geometry."""
    parts = state.world_parts(colliders_only=True)
    if parts.n == 0:
        return True
    return float(parts.sdf_matrix(np.atleast_2d(camera_pos)).min()) >= margin


def points_clear_of_scene(points: np.ndarray, state: SceneState, margin: float) -> np.ndarray:
    """Vectorized clearance mask for many candidate points."""
    parts = state.world_parts(colliders_only=True)
    pts = np.atleast_2d(points)
    if parts.n == 0:
        return np.ones(len(pts), dtype=bool)
    return parts.sdf_matrix(pts).min(axis=1) >= margin
