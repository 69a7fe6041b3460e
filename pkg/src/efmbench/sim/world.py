"""Quasi-static world stepping: clamped end-effector motion, automatic
grasp/release on gripper threshold crossings, movable-object pushing,
penetration resolution, and contact wrench synthesis.

Objects move only when pushed, held, or dropped; dt is fixed at the
recording clock (0.1 s).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Pose, quat_angle, quat_from_axis_angle, quat_slerp
from . import contact as contact_mod
from .contact import Wrench, build_entity, contact_forces, entity_contacts
from .scene import Attachment, Body, RobotState, SceneError, SceneState, with_updates

ARMS = ("left", "right")


@dataclass(frozen=True)
class CartesianTarget:
    """Per-arm action: desired EE pose plus gripper opening in [0, 1]."""

    ee_pose_target: Pose
    gripper_target: float

    def __post_init__(self):
        g = float(self.gripper_target)
        if not np.isfinite(g):
            raise ValueError("non-finite gripper target")
        object.__setattr__(self, "gripper_target", min(1.0, max(0.0, g)))

    def to_array(self) -> np.ndarray:
        """8 numbers: pose (7) + gripper (1)."""
        return np.concatenate([self.ee_pose_target.to_array(), [self.gripper_target]])

    @staticmethod
    def from_array(a: np.ndarray) -> "CartesianTarget":
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (8,):
            raise ValueError(f"cartesian target needs 8 numbers, got {a.shape}")
        return CartesianTarget(Pose.from_array(a[:7]), a[7])

    @staticmethod
    def hold(pose: Pose, gripper: float) -> "CartesianTarget":
        return CartesianTarget(pose, gripper)


def _clamp_motion(current: Pose, target: Pose, params) -> Pose:
    delta = target.position - current.position
    d = np.linalg.norm(delta)
    pos = target.position if d <= params.max_step_translation else (
        current.position + delta * (params.max_step_translation / d)
    )
    ang = quat_angle(current.quat, target.quat)
    if ang <= params.max_step_rotation or ang < 1e-12:
        quat = target.quat
    else:
        quat = quat_slerp(current.quat, target.quat, params.max_step_rotation / ang)
    return Pose(pos, quat)


def _held_pose(ee: Pose, att: Attachment) -> Pose:
    return ee.compose(att.offset)


def _entity_for(state, ee_pose, prev_ee, arm_att, held_pose=None, prev_held=None):
    if arm_att is None:
        return build_entity(state, ee_pose, prev_ee, None, None, None), frozenset()
    held = state.body(arm_att.body_id)
    hp = held_pose if held_pose is not None else _held_pose(ee_pose, arm_att)
    php = prev_held if prev_held is not None else _held_pose(prev_ee, arm_att)
    return build_entity(state, ee_pose, prev_ee, held, hp, php), frozenset([held.id])


def _resolve_entity_pose(state, prev_pose: Pose, cand_pose: Pose, att, hard_excl):
    """Project the entity out of penetrations deeper than max_penetration;
    fall back to bisecting toward the previous (valid) pose."""
    params = state.params
    limit = params.max_penetration

    def depth_at(pose):
        ent, excl = _entity_for(state, pose, pose, att)
        return contact_mod.max_penetration_depth(ent, state, excl | hard_excl)

    pose = cand_pose
    for _ in range(16):
        depth, normal = depth_at(pose)
        if depth <= limit + 1e-12:
            return pose
        pose = Pose(pose.position + (depth - limit) * normal, pose.quat)
    # Projection did not converge (corner cases): bisect back along the step.
    lo, hi = 0.0, 1.0
    good = prev_pose
    for _ in range(14):
        mid = 0.5 * (lo + hi)
        p = Pose(
            prev_pose.position + mid * (cand_pose.position - prev_pose.position),
            quat_slerp(prev_pose.quat, cand_pose.quat, mid),
        )
        depth, _ = depth_at(p)
        if depth <= limit + 1e-12:
            lo, good = mid, p
        else:
            hi = mid
    return good


def _support_height(state: SceneState, body_id: str) -> float | None:
    """Top of the highest support surface beneath the body's footprint."""
    body = state.body(body_id)
    pose = state.poses[body_id]
    lo, hi = _world_aabb(body, pose)
    allow = state.params.max_penetration + 1e-6
    best = None
    for other in state.bodies:
        if other.id == body_id or not other.collider:
            continue
        opose = state.poses[other.id]
        for off, prim in other.parts:
            from .shapes import aabb_of

            plo, phi = aabb_of(opose.compose(off), prim)
            if plo[0] < hi[0] and phi[0] > lo[0] and plo[1] < hi[1] and phi[1] > lo[1]:
                if phi[2] <= lo[2] + allow:
                    if best is None or phi[2] > best:
                        best = float(phi[2])
    return best


def _world_aabb(body: Body, pose: Pose):
    from .shapes import aabb_of

    los, his = [], []
    for off, prim in body.parts:
        lo, hi = aabb_of(pose.compose(off), prim)
        los.append(lo)
        his.append(hi)
    return np.min(los, axis=0), np.max(his, axis=0)


def _settle(state: SceneState, body_id: str) -> Pose:
    """Quasi-static vertical drop onto the highest support beneath."""
    pose = state.poses[body_id]
    body = state.body(body_id)
    lo, _ = _world_aabb(body, pose)
    support = _support_height(state, body_id)
    if support is None:
        support = 0.0  # table plane fallback
    dz = support - float(lo[2])
    return Pose(pose.position + np.array([0.0, 0.0, dz]), pose.quat)


def _draw_grasp_jitter(rng, params):
    # Uniform in a ball for translation; uniform axis, uniform angle for rotation.
    while True:
        v = rng.uniform(-1.0, 1.0, size=3)
        if np.dot(v, v) <= 1.0:
            break
    t = v * params.grasp_jitter_t
    axis = rng.normal(size=3)
    n = np.linalg.norm(axis)
    axis = axis / n if n > 1e-12 else np.array([0.0, 0.0, 1.0])
    ang = rng.uniform(0.0, params.grasp_jitter_r)
    return Pose(t, quat_from_axis_angle(axis, ang))


def _attempt_grasp(state: SceneState, arm: str, poses: dict, rng) -> tuple:
    """Try to attach the graspable body whose grasp region contains the
    gripper tip. Returns (attachment | None, event)."""
    params = state.params
    ee_pos = state.robot.ee(arm).position
    held_elsewhere = {a.body_id for a in state.attachments.values()}
    best = None
    best_d = np.inf
    for b in state.bodies:
        if b.grasp is None or b.static:
            continue
        anchor = poses[b.id].transform_point(b.grasp.anchor)
        d = float(np.linalg.norm(ee_pos - anchor))
        if d <= b.grasp.radius and d < best_d and b.id not in held_elsewhere:
            best, best_d = b, d
    if best is None:
        return None, ("grasp_failed", arm)
    jitter = _draw_grasp_jitter(rng, params)
    offset = best.grasp.hold_offset.compose(jitter)
    return Attachment(best.id, offset), ("grasped", arm, best.id)


def _hang_hook(state: SceneState, body_id: str, poses: dict, tol: float = 0.02):
    body = state.body(body_id)
    if body.hang_point is None:
        return None
    hp = poses[body_id].transform_point(body.hang_point)
    for other in state.bodies:
        if other.hook_point is None or other.id == body_id:
            continue
        hook = poses[other.id].transform_point(other.hook_point)
        if np.linalg.norm(hp - hook) <= tol:
            return other.id
    return None


def _release_body(state, body_id, poses, seated, hanging):
    """Detach aftermath: seat in a socket, hang on a hook, or settle."""
    body = state.body(body_id)
    if body.plug is not None:
        tip = poses[body_id].transform_point(body.plug.tip)
        hit = contact_mod.find_socket(with_updates(state, poses=poses), tip)
        if hit is not None:
            host_idx, spec, mouth, axis = hit
            rel = tip - mouth
            s = float(rel @ axis)
            lat = np.linalg.norm(rel - s * axis)
            if s >= 0.8 * spec.chamfer_depth and lat <= spec.clearance + 1e-6:
                seated[body_id] = (state.bodies[host_idx].id, spec.name)
                return ("seated", body_id, state.bodies[host_idx].id, spec.name)
    rack = _hang_hook(state, body_id, poses)
    if rack is not None:
        hanging[body_id] = (rack,)
        return ("hung", body_id, rack)
    settled = _settle(with_updates(state, poses=poses), body_id)
    poses[body_id] = settled
    return ("settled", body_id)


def _push_phase(state, poses, attachments, pushable, new_ee, prev_ee):
    """One motion increment: arms push free movables, movables clamp
    against statics, blocked movables push the arms back."""
    params = state.params
    mid_state = with_updates(state, poses=poses)
    moved_ids = set()
    for arm in ARMS:
        att = attachments.get(arm)
        ent, excl = _entity_for(mid_state, new_ee[arm], prev_ee[arm], att)
        parts = mid_state.world_parts(exclude=excl)
        if parts.n == 0:
            continue
        for _ in range(8):
            dist, normal, owner = parts.sdf(ent.points)
            depth = ent.radii - dist
            order = np.argsort(-depth)
            worst = None
            for i in order:
                if depth[i] <= params.max_penetration + 1e-12:
                    break
                tb = mid_state.bodies[int(owner[i])]
                if tb.id in pushable:
                    worst = (int(i), tb.id)
                    break
            if worst is None:
                break
            i, body_id = worst
            shift = -(float(depth[i]) - params.max_penetration) * normal[i]
            p = poses[body_id]
            poses[body_id] = Pose(p.position + shift, p.quat)
            moved_ids.add(body_id)
            mid_state = with_updates(state, poses=poses)
            parts = mid_state.world_parts(exclude=excl)

    for body_id in sorted(moved_ids):
        body = state.body(body_id)
        probe = poses[body_id].transform_points(body.contact_local)
        parts = mid_state.world_parts(exclude=frozenset(pushable | {body_id}))
        if parts.n:
            for _ in range(8):
                dist, normal, _ = parts.sdf(probe)
                worst = int(np.argmin(dist))
                if -dist[worst] <= params.max_penetration + 1e-12:
                    break
                shift = (-dist[worst] - params.max_penetration) * normal[worst]
                p = poses[body_id]
                poses[body_id] = Pose(p.position + shift, p.quat)
                probe = probe + shift
        mid_state = with_updates(state, poses=poses)
    return mid_state


def step(
    state: SceneState, left: CartesianTarget, right: CartesianTarget
) -> tuple[SceneState, Wrench, Wrench]:
    """Advance one tick. Returns the new snapshot plus both arm wrenches."""
    params = state.params
    targets = {"left": left, "right": right}
    for arm, t in targets.items():
        arr = t.to_array()
        if not np.all(np.isfinite(arr)):
            raise SceneError(f"non-finite target for {arm} arm")

    poses = dict(state.poses)
    attachments = dict(state.attachments)
    seated = dict(state.seated)
    hanging = dict(state.hanging)
    paint = dict(state.paint)
    events = []
    rng = state.rng()

    prev_ee = {arm: state.robot.ee(arm) for arm in ARMS}
    prev_grip = {"left": state.robot.left_gripper, "right": state.robot.right_gripper}

    pushable = {
        b.id
        for b in state.bodies
        if not b.static
        and b.collider
        and b.id not in seated
        and b.id not in hanging
        and b.id not in {a.body_id for a in attachments.values()}
    }
    goal_ee = {arm: _clamp_motion(prev_ee[arm], targets[arm].ee_pose_target, params) for arm in ARMS}

    # Substep fast motion near pushable bodies so contacts always start at
    # the entry face (a 5 cm jump straight into a box would otherwise pick
    # the wrong SDF face and tunnel).
    max_move = max(
        np.linalg.norm(goal_ee[arm].position - prev_ee[arm].position) for arm in ARMS
    )
    n_sub = 1
    if pushable and max_move > 0.012:
        near = False
        for arm in ARMS:
            seg_mid = 0.5 * (goal_ee[arm].position + prev_ee[arm].position)
            held = attachments.get(arm)
            reach = max_move + 0.16 + (0.1 if held else 0.0)
            for bid in pushable:
                if np.linalg.norm(poses[bid].position - seg_mid) < reach:
                    near = True
                    break
            if near:
                break
        if near:
            n_sub = min(6, int(np.ceil(max_move / 0.01)))

    new_ee = dict(prev_ee)
    sub_prev = dict(prev_ee)
    for k in range(1, n_sub + 1):
        frac = k / n_sub
        for arm in ARMS:
            cand = Pose(
                prev_ee[arm].position + frac * (goal_ee[arm].position - prev_ee[arm].position),
                quat_slerp(prev_ee[arm].quat, goal_ee[arm].quat, frac),
            )
            att = attachments.get(arm)
            resolved = _resolve_entity_pose(
                with_updates(state, poses=poses), sub_prev[arm], cand, att, frozenset(pushable)
            )
            new_ee[arm] = resolved
            if att is not None:
                poses[att.body_id] = _held_pose(resolved, att)
        _push_phase(state, poses, attachments, pushable, new_ee, sub_prev)
        sub_prev = dict(new_ee)

    # Re-resolve arms against the final movable placement (a blocked body
    # pushes the arm back).
    mid_state = with_updates(state, poses=poses)
    for arm in ARMS:
        att = attachments.get(arm)
        resolved = _resolve_entity_pose(mid_state, prev_ee[arm], new_ee[arm], att, frozenset())
        new_ee[arm] = resolved
        if att is not None:
            poses[att.body_id] = _held_pose(resolved, att)
    final_state = with_updates(state, poses=poses)

    # 3. Wrenches at the final configuration (with per-step velocities).
    prev_state = state
    wrenches = {}
    contacts_by_arm = {}
    push_forces = {}
    for arm in ARMS:
        att = attachments.get(arm)
        if att is not None:
            held = state.body(att.body_id)
            hp = _held_pose(new_ee[arm], att)
            php = _held_pose(prev_ee[arm], att) if arm in state.attachments else hp
            ent = build_entity(final_state, new_ee[arm], prev_ee[arm], held, hp, php)
            excl = frozenset([att.body_id])
        else:
            ent, excl = _entity_for(final_state, new_ee[arm], prev_ee[arm], None)
        cs = entity_contacts(ent, final_state, prev_state, excl)
        fs = contact_forces(cs, params)
        wrenches[arm] = contact_mod.assemble_wrench(cs, fs, new_ee[arm].position)
        contacts_by_arm[arm] = (cs, fs)
        for c, f in zip(cs, fs):
            if c.target >= 0:
                tb = final_state.bodies[c.target]
                if not tb.static and tb.id not in {a.body_id for a in attachments.values()}:
                    push_forces[tb.id] = push_forces.get(tb.id, np.zeros(3)) - f

    # 4. Knock: a seated plug advances when pressed hard enough along its axis.
    for body_id, (host_id, socket_name) in list(seated.items()):
        f_on = push_forces.get(body_id)
        if f_on is None:
            continue
        host = final_state.body(host_id)
        spec = next(s for s in host.sockets if s.name == socket_name)
        host_pose = poses[host_id]
        axis = host_pose.rotation() @ spec.axis
        drive = float(f_on @ axis)
        if drive >= params.knock_force:
            body = final_state.body(body_id)
            tip = poses[body_id].transform_point(body.plug.tip)
            mouth = host_pose.transform_point(spec.mouth)
            s = float((tip - mouth) @ axis)
            room = spec.chamfer_depth + spec.depth - s
            adv = min(params.knock_advance, max(room, 0.0))
            if adv > 0.0:
                p = poses[body_id]
                poses[body_id] = Pose(p.position + adv * axis, p.quat)
                events.append(("knocked", body_id, adv))
    final_state = with_updates(state, poses=poses)

    # 5. Brushing: a held tool tip pressing a paintable top face marks cells.
    for arm in ARMS:
        att = attachments.get(arm)
        if att is None:
            continue
        held = state.body(att.body_id)
        if held.tool_tip is None:
            continue
        cs, _ = contacts_by_arm[arm]
        for c in cs:
            if c.kind != "tool" or c.target < 0:
                continue
            tb = final_state.bodies[c.target]
            if tb.paint is None or c.normal[2] < 0.7:
                continue
            local = poses[tb.id].inverse().transform_point(c.point)
            marked = set(paint.get(tb.id, frozenset()))
            n = tb.paint.cells
            a = tb.paint.radius / np.sqrt(2.0)
            reach = held.tool_tip.radius + 0.006
            for iy in range(n):
                for ix in range(n):
                    cx = -a + (ix + 0.5) * 2 * a / n
                    cy = -a + (iy + 0.5) * 2 * a / n
                    if (local[0] - cx) ** 2 + (local[1] - cy) ** 2 <= reach**2:
                        marked.add(iy * n + ix)
            if marked:
                paint[tb.id] = frozenset(marked)

    # 6. Gripper threshold crossings: releases first, then grasps, so a
    #    simultaneous handover never drops the object in between.
    new_grip = {arm: targets[arm].gripper_target for arm in ARMS}
    released_bodies = []
    for arm in ARMS:
        opening = prev_grip[arm] < params.grasp_open_threshold <= new_grip[arm]
        if opening and arm in attachments:
            body_id = attachments.pop(arm).body_id
            released_bodies.append(body_id)
            events.append(("released", arm, body_id))
    grasp_state = with_updates(
        state, poses=poses, attachments=attachments, robot=_mk_robot(new_ee, new_grip)
    )
    for arm in ARMS:
        closing = prev_grip[arm] > params.grasp_close_threshold >= new_grip[arm]
        if closing and arm not in attachments:
            att, event = _attempt_grasp(grasp_state, arm, poses, rng)
            events.append(event)
            if att is not None:
                attachments[arm] = att
                poses[att.body_id] = _held_pose(new_ee[arm], att)
                seated.pop(att.body_id, None)
                hanging.pop(att.body_id, None)
                if att.body_id in released_bodies:
                    released_bodies.remove(att.body_id)
    for body_id in released_bodies:
        ev = _release_body(
            with_updates(state, poses=poses, attachments=attachments),
            body_id,
            poses,
            seated,
            hanging,
        )
        events.append(ev)

    robot = _mk_robot(new_ee, new_grip)
    out = with_updates(
        state,
        poses=poses,
        robot=robot,
        attachments=attachments,
        tick=state.tick + 1,
        rng_state=rng.bit_generator.state,
        seated=seated,
        hanging=hanging,
        paint=paint,
        push_forces=push_forces,
        events=tuple(events),
    )
    return out, wrenches["left"], wrenches["right"]


def _mk_robot(new_ee, new_grip) -> RobotState:
    return RobotState(new_ee["left"], new_ee["right"], new_grip["left"], new_grip["right"])


def grasp(state: SceneState, arm: str) -> SceneState:
    """Close the gripper and attach the graspable body at the tip, if any.

    The in-step automatic path (gripper target crossing the close
    threshold) routes through the same attachment logic.
    """
    if arm in state.attachments:
        return state
    rng = state.rng()
    poses = dict(state.poses)
    att, event = _attempt_grasp(state, arm, poses, rng)
    attachments = dict(state.attachments)
    seated = dict(state.seated)
    hanging = dict(state.hanging)
    if att is not None:
        attachments[arm] = att
        poses[att.body_id] = _held_pose(state.robot.ee(arm), att)
        seated.pop(att.body_id, None)
        hanging.pop(att.body_id, None)
    grip = {
        "left": (0.0 if arm == "left" else state.robot.left_gripper),
        "right": (0.0 if arm == "right" else state.robot.right_gripper),
    }
    robot = RobotState(state.robot.left_ee, state.robot.right_ee, grip["left"], grip["right"])
    return with_updates(
        state,
        poses=poses,
        robot=robot,
        attachments=attachments,
        seated=seated,
        hanging=hanging,
        rng_state=rng.bit_generator.state,
        events=(event,),
    )


def release(state: SceneState, arm: str) -> SceneState:
    """Open the gripper; a held object seats, hangs, or settles."""
    grip = {
        "left": (1.0 if arm == "left" else state.robot.left_gripper),
        "right": (1.0 if arm == "right" else state.robot.right_gripper),
    }
    robot = RobotState(state.robot.left_ee, state.robot.right_ee, grip["left"], grip["right"])
    if arm not in state.attachments:
        return with_updates(state, robot=robot, events=())
    attachments = dict(state.attachments)
    poses = dict(state.poses)
    seated = dict(state.seated)
    hanging = dict(state.hanging)
    body_id = attachments.pop(arm).body_id
    ev = _release_body(
        with_updates(state, attachments=attachments), body_id, poses, seated, hanging
    )
    return with_updates(
        state,
        poses=poses,
        robot=robot,
        attachments=attachments,
        seated=seated,
        hanging=hanging,
        events=(("released", arm, body_id), ev),
    )


def arm_clearance(state: SceneState, arm: str) -> float:
    """Smallest surface distance from the arm's probes to other geometry."""
    att = state.attachments.get(arm)
    ent, excl = _entity_for(state, state.robot.ee(arm), state.robot.ee(arm), att)
    parts = state.world_parts(exclude=excl)
    if parts.n == 0:
        return np.inf
    dist, _, _ = parts.sdf(ent.points)
    return float(np.min(dist - ent.radii))


def tips_distance(state: SceneState) -> float:
    return float(
        np.linalg.norm(state.robot.left_ee.position - state.robot.right_ee.position)
    )


def hold_targets(state: SceneState) -> tuple[CartesianTarget, CartesianTarget]:
    """No-op action pair: keep both arms where they are."""
    r = state.robot
    return (
        CartesianTarget(r.left_ee, r.left_gripper),
        CartesianTarget(r.right_ee, r.right_gripper),
    )
