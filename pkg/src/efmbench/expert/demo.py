"""Demonstration rollout: run a task's phase plan, drive the camera arm
with the active-view planner under the requested visibility mode, and
record the full episode at the simulation clock.

Every action is quantized to float32 before it is applied, so the stored
action stream replayed through the simulator reproduces the stored state
stream bit-for-bit.
"""

from __future__ import annotations

import zlib

import numpy as np

from ..data.episode import Episode
from ..geometry import Pose
from ..perception.camera import camera_world_pose, default_rig
from ..perception.observe import semantic_observation
from ..perception.render import render
from ..sim.contact import Wrench
from ..sim.world import CartesianTarget, step
from ..tasks.instance import TaskInstance
from ..tasks.success import check_success
from .plans import PLANS, Directive
from .viewplan import PlannerParams, ViewMode, mode_satisfied, plan_active_view, view_flags


def _expert_rng(seed: int, mode: ViewMode) -> np.random.Generator:
    mix = zlib.crc32(f"expert|{mode.value}".encode()) & 0xFFFFFFFF
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), mix])))


def _noise_seed(seed: int, t: int) -> int:
    return zlib.crc32(f"obs|{seed}|{t}".encode()) & 0xFFFFFFFF


def _quantize_targets(left: CartesianTarget, right: CartesianTarget):
    arr = np.concatenate([left.to_array(), right.to_array()]).astype(np.float32)
    ql = CartesianTarget.from_array(arr[:8].astype(np.float64))
    qr = CartesianTarget.from_array(arr[8:].astype(np.float64))
    return arr, ql, qr


def _phase_ranges(tags: list) -> list:
    phases = []
    for t, meta in enumerate(tags):
        if phases and all(phases[-1][k] == meta[k] for k in meta):
            phases[-1]["end"] = t
        else:
            entry = dict(meta)
            entry["start"] = t
            entry["end"] = t
            phases.append(entry)
    return phases


def demonstrate(
    instance: TaskInstance,
    mode: ViewMode | str,
    seed: int,
    obs_mode: str = "symbolic",
    planner_params: PlannerParams | None = None,
) -> Episode:
    """Generate one scripted demonstration episode.

    Deterministic: identical (instance, mode, seed) yield bit-identical
    episodes.
    """
    mode = ViewMode.parse(mode) if isinstance(mode, str) else mode
    cameras = default_rig()
    state = instance.scene
    rng = _expert_rng(seed, mode)
    ctx = {"inst": instance, "mode": mode, "rng": rng, "scene": state, "cameras": cameras}
    plan = PLANS[instance.spec.task_id](ctx)
    planner_params = planner_params or PlannerParams()

    wl = wr = Wrench.zero()
    states, actions, wls, wrs, flag_rows = [], [], [], [], []
    payload_sym, payload_img, tags = [], [], []
    decision = None
    cam_plan_pose: Pose | None = None
    cam_arm_hint = instance.spec.camera_arm
    limit = instance.spec.time_limit_steps
    pending: Directive | None = None
    wait_budget = 0
    last_tag = None

    for t in range(limit):
        ctx["scene"] = state
        nseed = _noise_seed(seed, t)
        records = {
            name: semantic_observation(spec, state, noise_seed=nseed)
            for name, spec in cameras.items()
        }
        ctx["record"] = records[f"{cam_arm_hint}_wrist"]
        if pending is None:
            try:
                pending = next(plan)
            except StopIteration:
                break
        directive = pending
        if directive.tag != last_tag:
            last_tag = directive.tag
            wait_budget = 22
        cam = directive.camera_arm
        cam_arm_hint = cam
        op_ee = state.robot.ee(directive.operating_arm)
        spec_cam = cameras[f"{cam}_wrist"]

        # AREA_ONLY with a hand-held object frames the work zone from a low
        # lateral angle: the probe sits beside the work point so the view
        # can include the area while the gripper stays out of frame.
        area_probe = directive.area_point
        if (
            mode is ViewMode.AREA_ONLY
            and directive.hand_held
            and directive.view_center is not None
        ):
            if directive.low_probe is not None:
                area_probe = directive.view_center + directive.low_probe
            else:
                side = -0.03 if cam == "left" else 0.03
                area_probe = directive.view_center + np.array([side, 0.0, 0.015])

        satisfied = True
        if directive.targets.get(cam) is None:
            prev = cam_plan_pose
            target, satisfied = plan_active_view(
                state,
                area_probe,
                op_ee,
                mode,
                prev,
                camera_arm=cam,
                spec=spec_cam,
                hand_held=directive.hand_held,
                seed=seed,
                params=planner_params,
                view_center=directive.view_center,
            )
            directive.targets[cam] = target
            cam_plan_pose = target.ee_pose_target
        else:
            cam_plan_pose = directive.targets[cam].ee_pose_target

        cam_pose_now = camera_world_pose(spec_cam, state.robot)
        fl = view_flags(spec_cam, cam_pose_now, area_probe, op_ee, state)

        # Before fine work starts (or resumes after the view breaks), let
        # the camera finish flying: hold the operating arm until the flags
        # recorded right now satisfy the mode.
        flags_good = mode_satisfied(mode, fl, directive.hand_held, planner_params)
        if flags_good:
            wait_budget = 22
        waiting = directive.manipulation and wait_budget > 0 and not flags_good
        if waiting:
            wait_budget -= 1
            hold_op = CartesianTarget(op_ee, state.robot.gripper(directive.operating_arm))
            exec_targets = {directive.operating_arm: hold_op, cam: directive.targets[cam]}
            directive.targets[cam] = None  # replan next frame
            tag_meta = {
                "name": "viewwait",
                "manipulation": False,
                "hand_held": directive.hand_held,
                "camera_arm": cam,
                "operating_arm": directive.operating_arm,
            }
        else:
            exec_targets = directive.targets
            pending = None
            tag_meta = {
                "name": directive.tag,
                "manipulation": directive.manipulation,
                "hand_held": directive.hand_held,
                "camera_arm": cam,
                "operating_arm": directive.operating_arm,
            }

        left_t = exec_targets.get("left") or CartesianTarget(
            state.robot.left_ee, state.robot.left_gripper
        )
        right_t = exec_targets.get("right") or CartesianTarget(
            state.robot.right_ee, state.robot.right_gripper
        )
        action_arr, ql, qr = _quantize_targets(left_t, right_t)

        states.append(state.robot.to_array().astype(np.float32))
        actions.append(action_arr)
        wls.append(wl.to_array().astype(np.float32))
        wrs.append(wr.to_array().astype(np.float32))
        flag_rows.append(
            np.array(
                [fl.area_visible, fl.ee_visible, fl.area_in_frustum, fl.ee_in_frustum],
                dtype=np.float32,
            )
        )
        if obs_mode == "symbolic":
            payload_sym.append(records)
        else:
            payload_img.append(
                {
                    name: render(spec, camera_world_pose(spec, state.robot), state)
                    for name, spec in cameras.items()
                }
            )
        tags.append(tag_meta)

        state, wl, wr = step(state, ql, qr)
        for ev in state.events:
            if ev[0] in ("released", "seated", "hung", "settled"):
                decision = {"step": t, "area_visible": bool(fl.area_visible)}

    report = check_success(instance, state, limit, decision)
    success = bool(report and report.success)
    failure = report.failure_reason if report else "timeout"
    return Episode(
        task_id=instance.spec.task_id,
        instruction=instance.instruction,
        variation_id=instance.variation_id,
        seed=seed,
        view_mode=mode.value,
        obs_mode=obs_mode,
        success=success,
        failure_reason=failure,
        operating_arm=instance.spec.operating_arm,
        camera_arm=instance.spec.camera_arm,
        states=np.array(states, dtype=np.float32).reshape(-1, 16),
        actions=np.array(actions, dtype=np.float32).reshape(-1, 16),
        wrench_left=np.array(wls, dtype=np.float32).reshape(-1, 6),
        wrench_right=np.array(wrs, dtype=np.float32).reshape(-1, 6),
        flags=np.array(flag_rows, dtype=np.float32).reshape(-1, 4),
        symbolic=payload_sym if obs_mode == "symbolic" else None,
        images=payload_img if obs_mode == "pixels" else None,
        phases=_phase_ranges(tags),
        intrinsics={name: spec.intrinsics() for name, spec in cameras.items()},
    )
