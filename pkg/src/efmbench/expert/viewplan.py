"""Active-view planning for the camera (non-operating) arm.

Candidate viewpoints live on a spherical cap around the manipulated
area's anchor point. Scoring is lexicographic: satisfy the visibility
mode first, keep the previous view while it still satisfies (hysteresis),
then minimize travel. NONE-mode candidates aim off to the side so the
area stays out of the frustum; AREA_ONLY candidates may aim below the
anchor to push the operating end effector out of the frame while the
area stays centered.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..geometry import Pose, look_at_quat
from ..perception.camera import CameraSpec, camera_world_pose, wrist_pose_for_camera
from ..perception.visibility import (
    camera_clear_of_scene,
    ee_visible_fraction,
    point_visible_fraction,
)
from ..sim.scene import ARM_REACH, LEFT_SHOULDER, RIGHT_SHOULDER, SceneState
from ..sim.world import CartesianTarget


class ViewMode(Enum):
    NONE = "none"
    AREA_ONLY = "area"
    AREA_AND_EE = "area_ee"

    @staticmethod
    def parse(name: str) -> "ViewMode":
        for m in ViewMode:
            if m.value == name or m.name == name:
                return m
        raise ValueError(f"unknown view mode {name!r}")


@dataclass(frozen=True)
class PlannerParams:
    radii: tuple = (0.26, 0.38)
    n_dirs: int = 24
    aim_drops: tuple = (0.0, 0.12)  # aim this far below the area anchor
    min_elevation: float = 0.10  # radians above horizontal
    max_elevation: float = 1.25
    min_ee_distance: float = 0.055
    min_scene_clearance: float = 0.03
    visible_at: float = 0.5
    hidden_at: float = 0.45  # stricter than the record threshold, for margin
    select_margin: float = 0.2  # newly picked views must satisfy by this much


@dataclass(frozen=True)
class ViewFlags:
    area_visible: bool
    ee_visible: bool
    area_in_frustum: bool
    ee_in_frustum: bool
    area_fraction: float
    ee_fraction: float


def view_flags(
    spec: CameraSpec,
    camera_pose: Pose,
    area_point: np.ndarray,
    operating_ee: Pose,
    state: SceneState,
) -> ViewFlags:
    from ..perception.camera import in_frustum
    from ..perception.visibility import _SPHERE_DIRS, _blocked, ee_probe_center

    # One fused cast: area probe points then gripper-knuckle probe points.
    area_pts = np.asarray(area_point, dtype=np.float64) + _SPHERE_DIRS * 0.006
    ee_pts = ee_probe_center(operating_ee) + _SPHERE_DIRS * 0.010
    pts = np.vstack([area_pts, ee_pts])
    frustum = in_frustum(spec, camera_pose, pts)
    blocked, _ = _blocked(state, camera_pose.position, pts, frozenset())
    vis = frustum & ~blocked
    k = len(_SPHERE_DIRS)
    area_frac = float(np.count_nonzero(vis[:k])) / k
    ee_frac = float(np.count_nonzero(vis[k:])) / k
    return ViewFlags(
        area_visible=area_frac >= 0.5,
        ee_visible=ee_frac >= 0.5,
        area_in_frustum=bool(in_frustum(spec, camera_pose, np.asarray(area_point)[None, :])[0]),
        ee_in_frustum=bool(in_frustum(spec, camera_pose, operating_ee.position[None, :])[0]),
        area_fraction=area_frac,
        ee_fraction=ee_frac,
    )


def mode_satisfied(
    mode: ViewMode, flags: ViewFlags, hand_held: bool, p: PlannerParams, margin: float = 0.0
) -> bool:
    """Mode check; a positive margin demands headroom (used when selecting
    a new view so that small arm motions don't immediately unseat it)."""
    if mode is ViewMode.AREA_AND_EE:
        return (
            flags.area_fraction >= p.visible_at + margin
            and flags.ee_fraction >= p.visible_at + margin
        )
    if mode is ViewMode.AREA_ONLY:
        ok = flags.area_fraction >= p.visible_at + margin
        if hand_held:
            ok = ok and flags.ee_fraction < p.hidden_at - margin / 2
        return ok
    return flags.area_fraction < p.hidden_at - margin / 2  # NONE


def _cap_directions(n: int, seed: int, p: PlannerParams) -> np.ndarray:
    """Deterministic spiral of unit directions on the upper cap, densified
    at low elevations (views into side openings live there)."""
    rng_phase = (zlib.crc32(f"cap{seed}".encode()) % 997) / 997.0
    golden = np.pi * (3.0 - np.sqrt(5.0))
    k = np.arange(n)
    frac = ((k + 0.5) / n) ** 1.4
    elev = p.min_elevation + (p.max_elevation - p.min_elevation) * frac
    azim = golden * k + 2 * np.pi * rng_phase
    return np.stack(
        [np.cos(elev) * np.cos(azim), np.cos(elev) * np.sin(azim), np.sin(elev)], axis=1
    )


def _shoulder(camera_arm: str) -> np.ndarray:
    return LEFT_SHOULDER if camera_arm == "left" else RIGHT_SHOULDER


def plan_active_view(
    state: SceneState,
    area_point: np.ndarray,
    operating_ee: Pose,
    mode: ViewMode,
    previous_view: Pose | None,
    *,
    camera_arm: str,
    spec: CameraSpec,
    hand_held: bool = False,
    seed: int = 0,
    params: PlannerParams | None = None,
    view_center: np.ndarray | None = None,
) -> tuple[CartesianTarget, bool]:
    """Camera-arm Cartesian target for the requested visibility mode.

    previous_view is the camera arm's planned EE pose; it is kept while it
    still satisfies the mode. view_center, when given, anchors the
    candidate sphere at the physical work point while area_point stays
    the line-of-sight probe. Returns (target, satisfied); when no
    candidate satisfies, the best-effort candidate comes back with
    satisfied=False.
    """
    p = params or PlannerParams()
    area = np.asarray(area_point, dtype=np.float64)
    center = area if view_center is None else np.asarray(view_center, dtype=np.float64)

    def camera_pose_of(ee_pose: Pose) -> Pose:
        return ee_pose.compose(spec.pose)

    if previous_view is not None:
        flags = view_flags(spec, camera_pose_of(previous_view), area, operating_ee, state)
        if mode_satisfied(mode, flags, hand_held, p):
            return CartesianTarget(previous_view, 1.0), True
        # A distant operating EE cannot share a frame with the area yet;
        # hold an area-true view instead of rescanning every step.
        ee_far = float(np.linalg.norm(operating_ee.position - area)) > 0.22
        if (
            mode is ViewMode.AREA_AND_EE
            and ee_far
            and flags.area_fraction >= p.visible_at
        ):
            return CartesianTarget(previous_view, 1.0), False

    dirs = _cap_directions(p.n_dirs, seed, p)
    shoulder = _shoulder(camera_arm)
    current = previous_view.position if previous_view is not None else shoulder

    radii = p.radii
    if mode is ViewMode.AREA_ONLY and hand_held:
        # Close-up framing: near viewpoints push the gripper out of frame
        # while the low area probe stays centered.
        radii = (0.14,) + tuple(p.radii)
    positions = (center[None, :] + np.concatenate([r * dirs for r in radii])).reshape(-1, 3)
    ok = (
        (positions[:, 2] >= 0.06)
        & (np.abs(positions[:, 0]) <= 0.55)
        & (positions[:, 1] >= -0.50)
        & (positions[:, 1] <= 0.45)
        & (np.linalg.norm(positions - shoulder, axis=1) <= ARM_REACH - 0.05)
        & (
            np.linalg.norm(positions[:, :2] - operating_ee.position[:2], axis=1)
            >= p.min_ee_distance
        )
    )
    from ..perception.visibility import points_clear_of_scene

    ok &= points_clear_of_scene(positions, state, p.min_scene_clearance)
    candidates = positions[ok]

    if mode is ViewMode.NONE:
        aims = [area + np.array([0.0, -0.38, 0.30]), area + np.array([0.35, 0.0, 0.30])]
    elif mode is ViewMode.AREA_ONLY and hand_held:
        aims = [area - np.array([0.0, 0.0, drop]) for drop in (0.0, 0.05, 0.10)]
    else:
        aims = [area]

    # Lexicographic score (mode first, then travel): scanning in travel
    # order means the first satisfying candidate is the winner.
    order = np.argsort(np.linalg.norm(candidates - current, axis=1), kind="stable")
    fallback = None
    fallback_key = None
    loose = None
    for idx in order:
        pos = candidates[idx]
        for aim in aims:
            cam_pose = Pose(pos, look_at_quat(pos, aim))
            # The wrist EE rides offset from the camera; keep its tip clear
            # of geometry too.
            tip = wrist_pose_for_camera(spec, cam_pose).position
            if not camera_clear_of_scene(tip, state, 0.026):
                continue
            flags = view_flags(spec, cam_pose, area, operating_ee, state)
            if mode_satisfied(mode, flags, hand_held, p, margin=p.select_margin):
                return CartesianTarget(wrist_pose_for_camera(spec, cam_pose), 1.0), True
            if loose is None and mode_satisfied(mode, flags, hand_held, p):
                loose = cam_pose
            if mode is ViewMode.NONE:
                miss = flags.area_fraction
            elif mode is ViewMode.AREA_AND_EE:
                miss = (1 - flags.area_fraction) + (1 - flags.ee_fraction)
            else:
                miss = (1 - flags.area_fraction) + (flags.ee_fraction if hand_held else 0.0)
            key = (miss, float(np.linalg.norm(pos - current)))
            if fallback is None or key < fallback_key:
                fallback, fallback_key = cam_pose, key

    if loose is not None:
        return CartesianTarget(wrist_pose_for_camera(spec, loose), 1.0), True
    if fallback is not None:
        return CartesianTarget(wrist_pose_for_camera(spec, fallback), 1.0), False
    # No reachable candidate at all: stay put.
    hold = previous_view if previous_view is not None else Pose(shoulder + np.array([0, 0.2, 0]))
    return CartesianTarget(hold, 1.0), False
