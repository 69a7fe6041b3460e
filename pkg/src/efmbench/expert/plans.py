"""Scripted per-task phase plans.

A plan is a generator yielding one Directive per step: the acting arm's
Cartesian target, the phase tag, the manipulated-area anchor, and
whether the frame counts as a manipulation / hand-held frame. The
camera arm is left to the active-view planner unless the phase scripts
it (exploration viewpoints, handover).

Plans read the live scene through ctx["scene"] and the camera arm's
latest symbolic record through ctx["record"]; semantic branches use the
record in modes whose active view explores, and fall back to ground
truth in NONE mode (the data-regime construction: the demonstrator
always knows the scene, the recorded observations are what varies).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Pose
from ..sim.scene import TOOL_DOWN, SceneState
from ..sim.world import CartesianTarget
from ..tasks.builders import CAB_IX, CAB_IZ, CAB_X, CAB_Y, COMPARTMENTS, compartment_mouth
from .viewplan import ViewMode


@dataclass
class Directive:
    tag: str
    operating_arm: str
    camera_arm: str
    targets: dict  # arm -> CartesianTarget | None (None: planner drives)
    area_point: np.ndarray  # line-of-sight probe for flags and planning
    hand_held: bool
    manipulation: bool
    view_center: np.ndarray | None = None  # candidate-sphere anchor
    low_probe: np.ndarray | None = None  # close-framing probe offset from center


def _pose(p, quat=TOOL_DOWN) -> Pose:
    return Pose(np.asarray(p, dtype=np.float64), quat)


def anchor_world(scene: SceneState, body_id: str) -> np.ndarray:
    body = scene.body(body_id)
    return scene.poses[body_id].transform_point(body.grasp.anchor)


def ee_for_object_pose(scene: SceneState, arm: str, desired: Pose) -> Pose:
    att = scene.attachments[arm]
    return desired.compose(att.offset.inverse())


def ee_for_held_point(scene: SceneState, arm: str, local_point, desired_world) -> Pose:
    """EE pose (tool-down) putting a held-body local point at a world point."""
    from ..geometry import quat_rotate

    att = scene.attachments[arm]
    offset_pt = att.offset.transform_point(np.asarray(local_point, dtype=np.float64))
    v = quat_rotate(TOOL_DOWN, offset_pt)
    return Pose(np.asarray(desired_world, dtype=np.float64) - v, TOOL_DOWN)


def plug_tip_ee(scene: SceneState, arm: str, desired_tip) -> Pose:
    body = scene.body(scene.attachments[arm].body_id)
    return ee_for_held_point(scene, arm, body.plug.tip, desired_tip)


def tool_tip_ee(scene: SceneState, arm: str, desired_tip) -> Pose:
    body = scene.body(scene.attachments[arm].body_id)
    return ee_for_held_point(scene, arm, body.tool_tip.offset, desired_tip)


def mouth_axis_world(scene: SceneState, host_id: str, socket_name: str):
    host = scene.body(host_id)
    spec = next(s for s in host.sockets if s.name == socket_name)
    pose = scene.poses[host_id]
    return pose.transform_point(spec.mouth), pose.rotation() @ spec.axis, spec


def insertion_depth(scene: SceneState, plug_id: str, host_id: str, socket_name: str) -> float:
    body = scene.body(plug_id)
    tip = scene.poses[plug_id].transform_point(body.plug.tip)
    mouth, axis, _ = mouth_axis_world(scene, host_id, socket_name)
    return float((tip - mouth) @ axis)


class Plan:
    """Helper wrapper owning ctx and the directive-yielding primitives."""

    def __init__(self, ctx):
        self.ctx = ctx
        self.inst = ctx["inst"]
        self.info = self.inst.info
        self.mode: ViewMode = ctx["mode"]
        self.rng = ctx["rng"]
        self.op = self.inst.spec.operating_arm
        self.cam = self.inst.spec.camera_arm

    @property
    def scene(self) -> SceneState:
        return self.ctx["scene"]

    def record(self):
        return self.ctx.get("record") or {"objects": [], "sockets": []}

    def _directive(self, tag, arm, target, area, *, cam_arm=None, cam_target=None,
                   manip=False, center=None, low_probe=None):
        scene = self.scene
        cam_arm = cam_arm or ("left" if arm == "right" else "right")
        targets = {arm: target, cam_arm: cam_target}
        hand_held = arm in scene.attachments
        if low_probe is None:
            low_probe = self.ctx.get("low_probe")
        return Directive(
            tag=tag,
            operating_arm=arm,
            camera_arm=cam_arm,
            targets=targets,
            area_point=np.asarray(area, dtype=np.float64),
            hand_held=hand_held,
            manipulation=manip,
            view_center=None if center is None else np.asarray(center, dtype=np.float64),
            low_probe=None if low_probe is None else np.asarray(low_probe, dtype=np.float64),
        )

    def goto(self, arm, pose: Pose, grip, tag, area, *, manip=False, tol=0.004,
             ang_tol=0.05, max_steps=40, jitter=0.0012, cam_arm=None, cam_target=None,
             center=None):
        from ..geometry import quat_angle

        for _ in range(max_steps):
            ee = self.scene.robot.ee(arm)
            if (
                np.linalg.norm(ee.position - pose.position) <= tol
                and quat_angle(ee.quat, pose.quat) <= ang_tol
                and abs(self.scene.robot.gripper(arm) - grip) < 1e-6
            ):
                return
            wobble = self.rng.normal(0.0, jitter, size=3) if jitter > 0 else 0.0
            target = CartesianTarget(Pose(pose.position + wobble, pose.quat), grip)
            yield self._directive(tag, arm, target, area, manip=manip,
                                  cam_arm=cam_arm, cam_target=cam_target, center=center)

    def set_grip(self, arm, grip, tag, area, *, manip=False, steps=1, rise=0.0,
                 cam_arm=None, cam_target=None, center=None):
        ee0 = self.scene.robot.ee(arm)
        target = Pose(ee0.position + np.array([0.0, 0.0, rise]), ee0.quat)
        for _ in range(steps):
            yield self._directive(tag, arm, CartesianTarget(target, grip), area,
                                  manip=manip, cam_arm=cam_arm, cam_target=cam_target,
                                  center=center)

    def dwell(self, arm, tag, area, steps, *, manip=False, cam_arm=None, cam_target=None):
        for _ in range(steps):
            ee = self.scene.robot.ee(arm)
            grip = self.scene.robot.gripper(arm)
            yield self._directive(tag, arm, CartesianTarget(ee, grip), area, manip=manip,
                                  cam_arm=cam_arm, cam_target=cam_target)

    def pick(self, arm, body_id, *, area=None, center=None, lift_z=0.12, cam_arm=None):
        anchor = anchor_world(self.scene, body_id)
        area = anchor + [0, 0, 0.035] if area is None else area
        center = anchor if center is None else center
        above = anchor + [0, 0, 0.06]
        yield from self.goto(arm, _pose(above), 1.0, "reach", area, manip=False,
                             cam_arm=cam_arm, center=center)
        yield from self.goto(arm, _pose(anchor + [0, 0, 0.012]), 1.0, "approach", area,
                             manip=True, tol=0.003, jitter=0.0006, cam_arm=cam_arm,
                             center=center)
        yield from self.set_grip(arm, 0.0, "grasp", area, manip=True, steps=2,
                                 cam_arm=cam_arm, center=center)
        if self.scene.held_body(arm) != body_id:
            return  # failed grasp; plan gives up, episode gets judged as-is
        yield from self.goto(arm, _pose(anchor + [0, 0, lift_z - anchor[2]]), 0.0, "lift",
                             area, manip=False, tol=0.01, cam_arm=cam_arm, center=center)

    def place_held(self, arm, desired_obj_pose: Pose, area=None, *, hover=0.05,
                   tag="place", center=None):
        held = self.scene.body(self.scene.attachments[arm].body_id)
        top = float(held.local_aabb()[1][2])
        # Probe above everything that will hover through this column.
        area = np.array(
            [desired_obj_pose.position[0], desired_obj_pose.position[1],
             desired_obj_pose.position[2] + top + hover + 0.025]
        )
        center = desired_obj_pose.position if center is None else center
        target = ee_for_object_pose(self.scene, arm, desired_obj_pose)
        above = Pose(target.position + [0, 0, hover], target.quat)
        yield from self.goto(arm, above, 0.0, "carry", area, manip=False, tol=0.01,
                             center=center)
        yield from self.goto(arm, target, 0.0, tag, area, manip=True, tol=0.0025,
                             jitter=0.0005, center=center)
        yield from self.set_grip(arm, 1.0, tag, area, manip=True, steps=2, rise=0.016,
                                 center=center)
        ee = self.scene.robot.ee(arm)
        yield from self.goto(arm, Pose(ee.position + [0, 0, 0.08], ee.quat), 1.0,
                             "retreat", area, tol=0.01, center=center)


    def insert_held(self, arm, host_id, socket_name, *, release=True):
        mouth, axis, spec = mouth_axis_world(self.scene, host_id, socket_name)
        held = self.scene.body(self.scene.attachments[arm].body_id)
        held_h = float(held.local_aabb()[1][2] - held.plug.tip[2])
        area = mouth + np.array([0, 0, held_h + 0.075])
        center = mouth
        hover = plug_tip_ee(self.scene, arm, mouth + np.array([0, 0, 0.05]))
        yield from self.goto(arm, hover, 0.0, "carry", area, manip=False, tol=0.008,
                             center=center)
        align = plug_tip_ee(self.scene, arm, mouth + np.array([0, 0, 0.012]))
        yield from self.goto(arm, align, 0.0, "align", area, manip=True, tol=0.0012,
                             jitter=0.0003, max_steps=30, center=center)
        # Clear the success threshold even at the goto tolerance edge.
        depth = spec.full_depth + 0.0018
        seat = plug_tip_ee(self.scene, arm, mouth + axis * depth)
        yield from self.goto(arm, seat, 0.0, "insert", area, manip=True, tol=0.0012,
                             jitter=0.0002, max_steps=24, center=center)
        if release:
            yield from self.set_grip(arm, 1.0, "insert", area, manip=True, steps=2,
                                     center=center)
            ee = self.scene.robot.ee(arm)
            yield from self.goto(arm, Pose(ee.position + [0, 0, 0.09], ee.quat), 1.0,
                                 "retreat", area, tol=0.012, center=center)

    # Semantic exploration -------------------------------------------------
    def explore_compartments(self, compartments, detect, fallback):
        """Drive the camera arm to each compartment mouth until ``detect``
        pulls a value out of the active record. NONE mode skips straight
        to ground truth."""
        if self.mode is ViewMode.NONE:
            return fallback
        from ..geometry import look_at_quat
        from ..perception.camera import wrist_pose_for_camera

        spec = self.ctx["cameras"][f"{self.cam}_wrist"]
        found = None
        for comp in compartments:
            mouth = compartment_mouth(comp)
            inside = mouth + np.array([0.06, 0.0, 0.005])
            cam_pos = mouth + np.array([-0.13, 0.0, 0.005])
            cam_pose = Pose(cam_pos, look_at_quat(cam_pos, inside))
            view = wrist_pose_for_camera(spec, cam_pose)
            op_hold = self.scene.robot.ee(self.op)
            grip = self.scene.robot.gripper(self.op)
            for _ in range(26):
                found = detect(self.record(), comp, cam_pose)
                if found is not None:
                    break
                yield self._directive(
                    "explore", self.op, CartesianTarget(op_hold, grip), inside,
                    cam_arm=self.cam, cam_target=CartesianTarget(view, 1.0),
                )
            if found is not None:
                # Hold one extra beat so the discovery frame is recorded.
                yield self._directive(
                    "explore", self.op, CartesianTarget(op_hold, grip), inside,
                    cam_arm=self.cam, cam_target=CartesianTarget(view, 1.0),
                )
                break
        return found if found is not None else fallback


def _body_color(scene, body_id):
    return scene.body(body_id).color


def plan_toy_find(ctx):
    p = Plan(ctx)
    required = p.info["required_color"]

    def detect(record, comp, cam_pose):
        # Only count toys actually inside the compartment being checked;
        # the camera can glimpse the other compartment's contents.
        z_lo = COMPARTMENTS[comp]["floor_z"] - 0.01
        z_hi = COMPARTMENTS[comp]["floor_z"] + 2 * CAB_IZ + 0.01
        for obj in record["objects"]:
            if obj["id"].startswith("toy") and obj["color"] == required:
                world = cam_pose.transform_point(np.asarray(obj["pos"]))
                if z_lo <= world[2] <= z_hi:
                    return comp
        return None

    comp = yield from p.explore_compartments(
        p.info["compartments_to_check"], detect, p.info["compartment"]
    )
    # The unique toy of the required color.
    toy_id = next(
        b.id for b in p.scene.bodies if b.id.startswith("toy") and b.color == required
    )
    anchor = anchor_world(p.scene, toy_id)
    mouth = compartment_mouth(comp)
    area_in = anchor + np.array([-0.035, 0, 0.025])
    stage = np.array([CAB_X - CAB_IX - 0.06, anchor[1], anchor[2] + 0.012])
    yield from p.goto(p.op, _pose(stage + [0, 0, 0.0]), 1.0, "reach", area_in, manip=False,
                      tol=0.006, center=mouth)
    yield from p.goto(p.op, _pose(anchor + [0, 0, 0.012]), 1.0, "approach", area_in,
                      manip=True, tol=0.003, jitter=0.0006, center=mouth)
    yield from p.set_grip(p.op, 0.0, "grasp", area_in, manip=True, steps=2, center=mouth)
    if p.scene.held_body(p.op) != toy_id:
        return
    drop = np.array([*p.info["drop_point"], 0.0])
    area_out = drop + [0, 0, 0.065]
    center_out = drop + [0, 0, 0.015]
    yield from p.goto(p.op, _pose([stage[0], anchor[1], anchor[2] + 0.012]), 0.0,
                      "extract", area_out, tol=0.006)
    yield from p.goto(p.op, _pose([stage[0], anchor[1], 0.16]), 0.0, "extract", area_out,
                      tol=0.01)
    desired = Pose(np.array([drop[0], drop[1], 0.015 + 0.002]))
    yield from p.place_held(p.op, desired, area_out, center=center_out)
    yield from p.dwell(p.op, "retreat", area_out, 2)


def plan_toy_match(ctx):
    p = Plan(ctx)
    comp = p.info["compartment"]

    def detect(record, c, cam_pose):
        for obj in record["objects"]:
            if obj["id"] == "plate":
                return obj["color"]
        return None

    color = yield from p.explore_compartments([comp], detect, p.info["required_color"])
    toy_id = next(
        b.id
        for b in p.scene.bodies
        if b.id.startswith("toy") and b.color == color
    )
    yield from p.pick(p.op, toy_id, lift_z=0.16)
    plate_pos = p.scene.poses["plate"].position
    plate_top = plate_pos[2] + 0.004
    area = plate_pos + np.array([-0.03, 0, 0.055])
    center_m = compartment_mouth(comp)
    stage_x = CAB_X - CAB_IX - 0.07
    carry_z = plate_top + 0.002 + 0.015  # toy center on approach
    ee_carry = ee_for_object_pose(
        p.scene, p.op, Pose(np.array([stage_x, plate_pos[1], carry_z + 0.004]))
    )
    yield from p.goto(p.op, ee_carry, 0.0, "carry", area, manip=False, tol=0.006,
                      center=center_m)
    # Transit through the opening is carry work; only the final settle onto
    # the plate is fine placement.
    enter = ee_for_object_pose(
        p.scene, p.op, Pose(np.array([plate_pos[0], plate_pos[1], carry_z + 0.004]))
    )
    yield from p.goto(p.op, enter, 0.0, "enter", area, manip=False, tol=0.004,
                      center=center_m)
    desired = Pose(np.array([plate_pos[0], plate_pos[1], carry_z]))
    target = ee_for_object_pose(p.scene, p.op, desired)
    yield from p.goto(p.op, target, 0.0, "place", area, manip=True, tol=0.0025,
                      jitter=0.0005, center=center_m)
    yield from p.set_grip(p.op, 1.0, "place", area, manip=True, steps=2, rise=0.016,
                          center=center_m)
    # Rise above the dropped toy before sliding back out of the compartment.
    ee = p.scene.robot.ee(p.op)
    clear_z = min(ee.position[2] + 0.025, plate_pos[2] + 0.062)
    yield from p.goto(p.op, Pose(np.array([ee.position[0], plate_pos[1], clear_z]),
                                 ee.quat), 1.0, "retreat", area, tol=0.006, center=center_m)
    yield from p.goto(p.op, Pose(np.array([stage_x, plate_pos[1], clear_z]), ee.quat),
                      1.0, "retreat", area, tol=0.008, center=center_m)
    ee = p.scene.robot.ee(p.op)
    yield from p.goto(p.op, Pose(ee.position + [0, 0, 0.08], ee.quat), 1.0, "retreat",
                      area, tol=0.01)


def _cup_transfer(p: Plan):
    """Left picks the cup, meets the right arm mid-table, hands it over."""
    cup_id = p.info["target_body"]
    yield from p.pick("left", cup_id, lift_z=0.20, cam_arm="right")
    h_jit = float(p.rng.uniform(-0.015, 0.015))
    meet = np.array([0.0, -0.17, 0.19 + h_jit])
    cup_anchor_after = meet  # left tip ends at the cup anchor height
    yield from p.goto("left", _pose(meet), 0.0, "transfer", meet, cam_arm="right",
                      tol=0.006)
    anchor = anchor_world(p.scene, cup_id)
    right_ready = anchor + np.array([0.035, 0.0, 0.0])
    # Scripted approach of the right arm while the left holds still.
    from ..geometry import quat_angle

    left_hold = p.scene.robot.ee("left")
    for _ in range(30):
        ee = p.scene.robot.ee("right")
        if (
            np.linalg.norm(ee.position - right_ready) <= 0.004
            and quat_angle(ee.quat, TOOL_DOWN) <= 0.05
        ):
            break
        yield Directive(
            "transfer", "right", "left",
            {"right": CartesianTarget(_pose(right_ready), 1.0),
             "left": CartesianTarget(left_hold, 0.0)},
            anchor, True, False,
        )
    # Simultaneous release and grasp in a single step.
    yield Directive(
        "transfer", "right", "left",
        {"right": CartesianTarget(p.scene.robot.ee("right"), 0.0),
         "left": CartesianTarget(left_hold, 1.0)},
        anchor, True, False,
    )
    if p.scene.held_body("right") != cup_id:
        return False
    # Left clears out and goes back to filming.
    clear = left_hold.position + np.array([-0.14, -0.05, 0.02])
    yield from p.goto("left", Pose(clear, left_hold.quat), 1.0, "transfer", anchor,
                      cam_arm="left", tol=0.01)
    return True


def plan_cup_hang(ctx):
    ctx["low_probe"] = (0.0, -0.055, 0.012)
    p = Plan(ctx)
    ok = yield from _cup_transfer(p)
    if not ok:
        return
    cup_id = p.info["target_body"]
    hook = np.asarray(p.info["hook_world"])
    area = hook + np.array([-0.03, 0.0, 0.075])
    center_h = hook
    body = p.scene.body(cup_id)
    hang_local = body.hang_point
    stage = hook + np.array([-0.07, 0.0, 0.035])
    target_ee = ee_for_held_point(p.scene, "right", hang_local, stage)
    yield from p.goto("right", target_ee, 0.0, "carry", area, manip=False, tol=0.008,
                      center=center_h)
    engage = hook + np.array([0.0, 0.0, 0.006])
    target_ee = ee_for_held_point(p.scene, "right", hang_local, engage)
    yield from p.goto("right", target_ee, 0.0, "align", area, manip=True, tol=0.0025,
                      jitter=0.0005, center=center_h)
    yield from p.set_grip("right", 1.0, "align", area, manip=True, steps=2, center=center_h)
    ee = p.scene.robot.ee("right")
    yield from p.goto("right", Pose(ee.position + [-0.08, 0, 0.03], ee.quat), 1.0,
                      "retreat", area, tol=0.012, center=center_h)


def plan_cup_place(ctx):
    ctx["low_probe"] = (-0.055, 0.0, 0.012)
    p = Plan(ctx)
    ok = yield from _cup_transfer(p)
    if not ok:
        return
    coaster = np.asarray(p.info["coaster_world"])
    area = coaster + np.array([0.0, 0.0, 0.175])
    center_c = coaster
    desired = Pose(np.array([coaster[0], coaster[1], coaster[2] + 0.002 + 0.042]))
    target = ee_for_object_pose(p.scene, "right", desired)
    above = Pose(target.position + [0, 0, 0.06], target.quat)
    yield from p.goto("right", above, 0.0, "carry", area, manip=False, tol=0.008,
                      center=center_c)
    yield from p.goto("right", target, 0.0, "place", area, manip=True, tol=0.002,
                      jitter=0.0004, center=center_c)
    yield from p.set_grip("right", 1.0, "place", area, manip=True, steps=2, rise=0.012,
                          center=center_c)
    ee = p.scene.robot.ee("right")
    yield from p.goto("right", Pose(ee.position + [0, -0.06, 0.08], ee.quat), 1.0,
                      "retreat", area, tol=0.012, center=center_c)


def plan_box_push(ctx):
    p = Plan(ctx)
    box_id = p.info["target_body"]
    gap = 0.035 + p.scene.params.tip_radius - p.scene.params.max_penetration

    def box_pos():
        return p.scene.poses[box_id].position

    area_fn = lambda: box_pos() + [0, 0, 0.06]
    center_fn = lambda: box_pos()
    ax, ay, _ = p.info["area_world"]
    z = 0.025
    bx, by = box_pos()[0], box_pos()[1]
    if abs(bx - ax) > 0.006:
        sign = 1.0 if bx > ax else -1.0
        yield from p.goto(p.op, _pose([bx + sign * 0.085, by, 0.10]), 1.0, "stage",
                          area_fn(), tol=0.01, center=center_fn())
        yield from p.goto(p.op, _pose([bx + sign * 0.085, by, z]), 1.0, "stage",
                          area_fn(), tol=0.005, center=center_fn())
        final_tip_x = ax + sign * gap
        for _ in range(30):
            if abs(box_pos()[0] - ax) <= 0.006:
                break
            yield from p.goto(p.op, _pose([final_tip_x, box_pos()[1], z]), 1.0, "push",
                              area_fn(), manip=True, tol=0.002, jitter=0.0004,
                              max_steps=1, center=center_fn())
        ee = p.scene.robot.ee(p.op)
        yield from p.goto(p.op, Pose(ee.position + [sign * 0.03, 0, 0.08], ee.quat), 1.0,
                          "stage", area_fn(), tol=0.01, center=center_fn())
    bx, by = box_pos()[0], box_pos()[1]
    yield from p.goto(p.op, _pose([bx, by - 0.085, 0.10]), 1.0, "stage", area_fn(),
                      tol=0.01, center=center_fn())
    yield from p.goto(p.op, _pose([bx, by - 0.085, z]), 1.0, "stage", area_fn(),
                      tol=0.005, center=center_fn())
    final_tip_y = ay - gap
    for _ in range(40):
        if box_pos()[1] >= ay - 0.006:
            break
        yield from p.goto(p.op, _pose([box_pos()[0], final_tip_y, z]), 1.0, "push",
                          area_fn(), manip=True, tol=0.002, jitter=0.0004, max_steps=1,
                          center=center_fn())
    ee = p.scene.robot.ee(p.op)
    yield from p.goto(p.op, Pose(ee.position + [0, -0.05, 0.09], ee.quat), 1.0,
                      "retreat", area_fn(), tol=0.012, center=center_fn())


def plan_light_plug(ctx):
    p = Plan(ctx)
    yield from p.pick(p.op, p.info["target_body"], lift_z=0.12)
    if p.scene.held_body(p.op) != p.info["target_body"]:
        return
    yield from p.insert_held(p.op, p.info["host_body"], p.info["socket"])


def plan_bread_brush(ctx):
    ctx["low_probe"] = (-0.062, 0.0, 0.02)
    p = Plan(ctx)
    dough = p.info["target_body"]
    tray = np.asarray(p.info["tray_world"])
    yield from p.pick(p.op, dough, lift_z=0.12)
    if p.scene.held_body(p.op) != dough:
        return
    area = tray + np.array([0, 0, 0.05])
    desired = Pose(np.array([tray[0], tray[1], tray[2] + 0.002 + 0.010]))
    yield from p.place_held(p.op, desired, area, center=tray)
    yield from p.pick(p.op, p.info["brush_body"], lift_z=0.15)
    if p.scene.held_body(p.op) != p.info["brush_body"]:
        return
    top = p.scene.poses[dough].position + np.array([0, 0, 0.010])
    area = top + np.array([0, 0, 0.135])
    center_d = top
    tool_r = p.scene.body(p.info["brush_body"]).tool_tip.radius
    # Tip-sphere center rides above the face: ~3.5 mm bristle squash, below
    # the penetration bound so the dough is never shoved sideways.
    press_z = top[2] + tool_r - 0.0035
    for line in (-0.014, 0.0, 0.014):
        start = np.array([top[0] - 0.03, top[1] + line, top[2] + 0.02])
        yield from p.goto(p.op, tool_tip_ee(p.scene, p.op, start), 0.0, "carry", area,
                          manip=False, tol=0.006, center=center_d)
        near = np.array([top[0] - 0.03, top[1] + line, press_z + 0.006])
        yield from p.goto(p.op, tool_tip_ee(p.scene, p.op, near), 0.0, "brush", area,
                          manip=True, tol=0.0035, jitter=0.0004, max_steps=8,
                          center=center_d)
        press = np.array([top[0] - 0.03, top[1] + line, press_z])
        yield from p.goto(p.op, tool_tip_ee(p.scene, p.op, press), 0.0, "brush", area,
                          manip=True, tol=0.0035, jitter=0.0004, max_steps=8,
                          center=center_d)
        for xo in (-0.015, 0.0, 0.015, 0.03):
            sweep = np.array([top[0] + xo, top[1] + line, press_z])
            yield from p.goto(p.op, tool_tip_ee(p.scene, p.op, sweep), 0.0, "brush",
                              area, manip=True, tol=0.0035, jitter=0.0004, max_steps=4,
                              center=center_d)
        lift = np.array([top[0] + 0.03, top[1] + line, top[2] + 0.02])
        yield from p.goto(p.op, tool_tip_ee(p.scene, p.op, lift), 0.0, "brush", area,
                          manip=True, tol=0.006, max_steps=6, center=center_d)
    ee = p.scene.robot.ee(p.op)
    yield from p.goto(p.op, Pose(ee.position + [0.04, -0.04, 0.08], ee.quat), 0.0,
                      "retreat", area, tol=0.012)


def plan_nail_knock(ctx):
    ctx["low_probe"] = (-0.035, 0.0, -0.015)
    p = Plan(ctx)
    nail = p.info["target_body"]
    mouth = np.asarray(p.info["mouth_world"])
    area = mouth + np.array([0, 0, 0.125])
    center_n = mouth + np.array([0, 0, 0.03])
    yield from p.pick(p.op, nail, lift_z=0.13)
    if p.scene.held_body(p.op) != nail:
        return
    hover = plug_tip_ee(p.scene, p.op, mouth + np.array([0, 0, 0.04]))
    yield from p.goto(p.op, hover, 0.0, "carry", area, manip=False, tol=0.006,
                      center=center_n)
    align = plug_tip_ee(p.scene, p.op, mouth + np.array([0, 0, 0.012]))
    yield from p.goto(p.op, align, 0.0, "align", area, manip=True, tol=0.0012,
                      jitter=0.0003, max_steps=24, center=center_n)
    seat = plug_tip_ee(p.scene, p.op, mouth + np.array([0, 0, -0.008]))
    yield from p.goto(p.op, seat, 0.0, "place", area, manip=True, tol=0.0012,
                      jitter=0.0002, max_steps=16, center=center_n)
    yield from p.set_grip(p.op, 1.0, "place", area, manip=True, steps=2, center=center_n)
    ee = p.scene.robot.ee(p.op)
    yield from p.goto(p.op, Pose(ee.position + [0, 0, 0.10], ee.quat), 1.0, "lift", area,
                      tol=0.01, center=center_n)
    yield from p.pick(p.op, p.info["hammer_body"], lift_z=0.15)
    if p.scene.held_body(p.op) != p.info["hammer_body"]:
        return
    host, socket = p.info["host_body"], p.info["socket"]
    target_depth = p.inst.spec.thresholds["target_depth"] + 0.0008

    def head_top():
        pose = p.scene.poses[nail]
        return pose.position + np.array([0.0, 0.0, 0.023])

    stage = head_top() + np.array([0, 0, 0.025])
    yield from p.goto(p.op, tool_tip_ee(p.scene, p.op, stage), 0.0, "carry", area,
                      manip=False, tol=0.005, center=center_n)
    for _ in range(40):
        if insertion_depth(p.scene, nail, host, socket) >= target_depth:
            break
        press = head_top() + np.array([0.0, 0.0, -0.004])
        yield from p.goto(p.op, tool_tip_ee(p.scene, p.op, press), 0.0, "knock", area,
                          manip=True, tol=0.0015, jitter=0.0003, max_steps=1,
                          center=center_n)
    ee = p.scene.robot.ee(p.op)
    yield from p.goto(p.op, Pose(ee.position + [0, -0.04, 0.10], ee.quat), 0.0,
                      "retreat", area, tol=0.012, center=center_n)


def plan_cable_match(ctx):
    p = Plan(ctx)
    mouth = np.asarray(p.info["mouth_world"])

    def detect(record, comp):
        for obj in record["objects"]:
            if obj["id"] == p.info["marker_body"]:
                return obj["color"]
        return None

    if p.mode is ViewMode.NONE:
        color = p.info["required_color"]
    else:
        from ..geometry import look_at_quat
        from ..perception.camera import wrist_pose_for_camera

        spec = p.ctx["cameras"][f"{p.cam}_wrist"]
        cam_pos = mouth + np.array([-0.07, -0.02, 0.16])
        cam_pose = Pose(cam_pos, look_at_quat(cam_pos, mouth))
        view = wrist_pose_for_camera(spec, cam_pose)
        color = None
        op_hold = p.scene.robot.ee(p.op)
        for _ in range(26):
            color = detect(p.record(), None)
            if color is not None:
                break
            yield p._directive("explore", p.op, CartesianTarget(op_hold, 1.0), mouth,
                               cam_arm=p.cam, cam_target=CartesianTarget(view, 1.0))
        if color is None:
            color = p.info["required_color"]
        else:
            yield p._directive("explore", p.op, CartesianTarget(op_hold, 1.0), mouth,
                               cam_arm=p.cam, cam_target=CartesianTarget(view, 1.0))
    cable = next(
        b.id for b in p.scene.bodies if b.id.startswith("cable") and b.color == color
    )
    yield from p.pick(p.op, cable, lift_z=0.13)
    if p.scene.held_body(p.op) != cable:
        return
    yield from p.insert_held(p.op, p.info["host_body"], p.info["socket"])


def plan_charger_plug(ctx):
    p = Plan(ctx)
    yield from p.pick(p.op, p.info["target_body"], lift_z=0.13)
    if p.scene.held_body(p.op) != p.info["target_body"]:
        return
    yield from p.insert_held(p.op, p.info["host_body"], p.info["socket"])


PLANS = {
    "toy_find": plan_toy_find,
    "toy_match": plan_toy_match,
    "cup_hang": plan_cup_hang,
    "cup_place": plan_cup_place,
    "box_push": plan_box_push,
    "light_plug": plan_light_plug,
    "bread_brush": plan_bread_brush,
    "nail_knock": plan_nail_knock,
    "cable_match": plan_cable_match,
    "charger_plug": plan_charger_plug,
}


def role_assignment(instance) -> dict:
    """Arm duties for a task: who operates, who films, and when they swap."""
    spec = instance.spec
    schedule = []
    if spec.handover:
        schedule.append(
            {"phase": "transfer", "operating_before": "left", "operating_after": "right"}
        )
    return {
        "operating_arm": spec.operating_arm,
        "camera_arm": spec.camera_arm,
        "handover_schedule": schedule,
    }
