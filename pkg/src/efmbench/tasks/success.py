"""Geometric success predicates and the failure taxonomy.

The judge reads only the scene; when classifying a failed placement it
additionally needs to know whether the decisive area was visible from
the active camera when the commitment (release, seating) happened, which
the caller tracks and passes in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim.scene import SceneState
from ..sim.world import _world_aabb
from .instance import TaskInstance

FAILURE_REASONS = (
    "none",
    "wrong_semantic_choice",
    "occlusion_misplacement",
    "mis_positioning",
    "timeout",
)


@dataclass(frozen=True)
class SuccessReport:
    success: bool
    failure_reason: str
    step_of_decision: int

    def __post_init__(self):
        if self.failure_reason not in FAILURE_REASONS:
            raise ValueError(f"unknown failure reason {self.failure_reason!r}")
        if self.success != (self.failure_reason == "none"):
            raise ValueError("success iff failure_reason is none")


def _held_ids(scene: SceneState):
    return {a.body_id for a in scene.attachments.values()}


def _bottom(scene: SceneState, body_id: str) -> float:
    lo, _ = _world_aabb(scene.body(body_id), scene.poses[body_id])
    return float(lo[2])


def _on_table(scene: SceneState, body_id: str, tol: float) -> bool:
    p = scene.poses[body_id].position
    return (
        abs(_bottom(scene, body_id)) <= tol
        and abs(p[0]) <= 0.45
        and abs(p[1]) <= 0.30
        and body_id not in _held_ids(scene)
    )


def insertion_state(scene: SceneState, plug_body: str, host_body: str, socket_name: str):
    """(depth along the hole, lateral offset) of a plug tip in a socket."""
    body = scene.body(plug_body)
    host = scene.body(host_body)
    spec = next(s for s in host.sockets if s.name == socket_name)
    tip = scene.poses[plug_body].transform_point(body.plug.tip)
    pose = scene.poses[host_body]
    mouth = pose.transform_point(spec.mouth)
    axis = pose.rotation() @ spec.axis
    rel = tip - mouth
    s = float(rel @ axis)
    lat = float(np.linalg.norm(rel - s * axis))
    return s, lat, spec


def _inserted(scene, plug_body, host_body, socket_name, frac=1.0):
    s, lat, spec = insertion_state(scene, plug_body, host_body, socket_name)
    return s >= frac * spec.full_depth and lat <= spec.clearance + 1e-6


def _toy_find(inst: TaskInstance, scene: SceneState):
    tol = inst.spec.thresholds["table_rest_tol"]
    if _on_table(scene, inst.info["target_body"], tol):
        return True, False
    for b in scene.bodies:
        if b.id.startswith("toy_") and b.color != inst.info["required_color"]:
            if _on_table(scene, b.id, tol):
                return False, True
    return False, False


def _resting_on_plate(inst, scene, toy_id):
    plate_id = inst.info["plate_body"]
    pp = scene.poses[plate_id].position
    tp = scene.poses[toy_id].position
    xy = np.hypot(tp[0] - pp[0], tp[1] - pp[1])
    plate_top = pp[2] + 0.004
    bottom = _bottom(scene, toy_id)
    return (
        xy <= inst.spec.thresholds["plate_xy_tol"]
        and plate_top - 0.002 <= bottom <= plate_top + 0.012
        and toy_id not in _held_ids(scene)
    )


def _toy_match(inst: TaskInstance, scene: SceneState):
    if _resting_on_plate(inst, scene, inst.info["target_body"]):
        return True, False
    for c in inst.info["candidates"]:
        if c != inst.info["target_body"] and _resting_on_plate(inst, scene, c):
            return False, True
    return False, False


def _cup_hang(inst: TaskInstance, scene: SceneState):
    target = inst.info["target_body"]
    if target in scene.hanging and target not in _held_ids(scene):
        return True, False
    for b in scene.bodies:
        if b.id.startswith("cup_d") and b.id in scene.hanging:
            return False, True
    return False, False


def _on_coaster(inst, scene, cup_id):
    cw = np.asarray(inst.info["coaster_world"])
    p = scene.poses[cup_id].position
    xy = np.hypot(p[0] - cw[0], p[1] - cw[1])
    bottom = _bottom(scene, cup_id)
    return (
        xy <= inst.spec.thresholds["coaster_xy_tol"]
        and abs(bottom - cw[2]) <= inst.spec.thresholds["rest_tol"]
        and cup_id not in _held_ids(scene)
    )


def _cup_place(inst: TaskInstance, scene: SceneState):
    if _on_coaster(inst, scene, inst.info["target_body"]):
        return True, False
    for b in scene.bodies:
        if b.id.startswith("cup_d") and _on_coaster(inst, scene, b.id):
            return False, True
    return False, False


def _box_push(inst: TaskInstance, scene: SceneState):
    area = np.asarray(inst.info["area_world"])
    p = scene.poses[inst.info["target_body"]].position
    tol = inst.spec.thresholds["area_xy_tol"]
    return (abs(p[0] - area[0]) <= tol and abs(p[1] - area[1]) <= tol), False


def _light_plug(inst: TaskInstance, scene: SceneState):
    ok = _inserted(scene, inst.info["target_body"], inst.info["host_body"], inst.info["socket"])
    return ok, False


def _bread_brush(inst: TaskInstance, scene: SceneState):
    dough = inst.info["target_body"]
    tray = np.asarray(inst.info["tray_world"])
    p = scene.poses[dough].position
    body = scene.body(dough)
    cells = body.paint.cells**2
    coverage = len(scene.paint.get(dough, ())) / cells
    on_tray = (
        abs(p[0] - tray[0]) <= 0.03
        and abs(p[1] - tray[1]) <= 0.02
        and abs(_bottom(scene, dough) - tray[2]) <= 0.004
        and dough not in _held_ids(scene)
    )
    return (on_tray and coverage >= inst.spec.thresholds["coverage"]), False


def _nail_knock(inst: TaskInstance, scene: SceneState):
    s, lat, spec = insertion_state(
        scene, inst.info["target_body"], inst.info["host_body"], inst.info["socket"]
    )
    target = inst.spec.thresholds["target_depth"]
    return (s >= target and lat <= spec.clearance + 1e-6), False


def _cable_match(inst: TaskInstance, scene: SceneState):
    if _inserted(scene, inst.info["target_body"], inst.info["host_body"], inst.info["socket"]):
        return True, False
    for c in inst.info["candidates"]:
        if c == inst.info["target_body"]:
            continue
        if _inserted(scene, c, inst.info["host_body"], inst.info["socket"], frac=0.4):
            return False, True
    return False, False


def _charger_plug(inst: TaskInstance, scene: SceneState):
    host = inst.info["host_body"]
    target = inst.info["target_body"]
    if _inserted(scene, target, host, inst.info["socket"]):
        return True, False
    for s in scene.body(host).sockets:
        if s.name != inst.info["socket"] and _inserted(scene, target, host, s.name, frac=0.4):
            return False, True
    return False, False


_PREDICATES = {
    "toy_find": _toy_find,
    "toy_match": _toy_match,
    "cup_hang": _cup_hang,
    "cup_place": _cup_place,
    "box_push": _box_push,
    "light_plug": _light_plug,
    "bread_brush": _bread_brush,
    "nail_knock": _nail_knock,
    "cable_match": _cable_match,
    "charger_plug": _charger_plug,
}


def task_predicate(inst: TaskInstance, scene: SceneState):
    """(success, wrong_target_committed) for the instance's task."""
    return _PREDICATES[inst.spec.task_id](inst, scene)


def check_success(
    inst: TaskInstance,
    scene: SceneState,
    current_step: int,
    decision: dict | None = None,
) -> SuccessReport | None:
    """Judge the episode at the given step.

    decision, when a placement commitment already happened, is
    {"step": int, "area_visible": bool} with the active-camera visibility
    of the decisive area at that step. Returns None while the episode is
    still undecided (no success, no wrong target, time remaining).
    """
    success, wrong = task_predicate(inst, scene)
    decision_step = decision["step"] if decision else current_step
    if success:
        return SuccessReport(True, "none", decision_step)
    if wrong:
        return SuccessReport(False, "wrong_semantic_choice", decision_step)
    if current_step >= inst.spec.time_limit_steps:
        if decision is not None:
            if not decision.get("area_visible", True):
                return SuccessReport(False, "occlusion_misplacement", decision_step)
            return SuccessReport(False, "mis_positioning", decision_step)
        return SuccessReport(False, "timeout", current_step)
    return None


def goal_area_point(inst: TaskInstance) -> np.ndarray:
    """3D anchor of the task's decisive goal region, used when classifying
    failed placements by active-view visibility at decision time."""
    info = inst.info
    tid = inst.spec.task_id
    if tid == "toy_find":
        return np.array([*info["drop_point"], 0.04])
    if tid == "toy_match":
        return inst.scene.poses[info["plate_body"]].position + np.array([0, 0, 0.03])
    if tid == "cup_hang":
        return np.asarray(info["hook_world"]) + np.array([0, 0, 0.02])
    if tid == "cup_place":
        return np.asarray(info["coaster_world"]) + np.array([0, 0, 0.02])
    if tid == "box_push":
        return np.asarray(info["area_world"]) + np.array([0, 0, 0.04])
    if tid == "bread_brush":
        return np.asarray(info["tray_world"]) + np.array([0, 0, 0.04])
    return np.asarray(info["mouth_world"]) + np.array([0, 0, 0.03])
