import numpy as np
import pytest

from efmbench.geometry import Pose, quat_from_axis_angle
from efmbench.sim import (
    CartesianTarget,
    SceneError,
    compute_contact_wrench,
    grasp,
    hold_targets,
    release,
    reset,
    step,
)
from efmbench.sim.scene import SimParams

TABLE = {
    "id": "table",
    "shape": {"type": "box", "half_extents": [0.45, 0.30, 0.02]},
    "pose": {"position": [0, 0, -0.02]},
    "color": "wood",
    "static": True,
}


def scene_desc(*bodies):
    return {"schema_version": 1, "bodies": [TABLE, *bodies]}


def box_body(bid, pos, half=(0.035, 0.035, 0.025), static=False, color="blue", **extra):
    return {
        "id": bid,
        "shape": {"type": "box", "half_extents": list(half)},
        "pose": {"position": list(pos)},
        "color": color,
        "static": static,
        **extra,
    }


def down_target(pos, grip=1.0):
    return CartesianTarget(Pose(np.asarray(pos, dtype=float)), grip)


def drive_to(state, arm, pose, grip=None, steps=30):
    for _ in range(steps):
        l, r = hold_targets(state)
        g = grip if grip is not None else (l if arm == "left" else r).gripper_target
        t = CartesianTarget(pose, g)
        if arm == "left":
            state, wl, wr = step(state, t, r)
        else:
            state, wl, wr = step(state, l, t)
        if state.robot.ee(arm).is_close(pose, 1e-9, 1e-9):
            break
    return state, wl, wr


class TestReset:
    def test_empty_scene(self):
        st = reset({"schema_version": 1, "bodies": []}, seed=0)
        assert len(st.bodies) == 0
        assert st.tick == 0

    def test_reset_deterministic(self):
        desc = scene_desc(box_body("b1", (0.1, 0.0, 0.025)))
        a = reset(desc, seed=7)
        b = reset(desc, seed=7)
        assert a.rng_state == b.rng_state
        assert np.array_equal(a.poses["b1"].to_array(), b.poses["b1"].to_array())
        assert np.array_equal(a.robot.to_array(), b.robot.to_array())

    def test_overlapping_statics_rejected(self):
        # Two static boxes sharing half their volume must be rejected; the
        # AABB overlap is positive in every axis.
        a = box_body("a", (0.0, 0.0, 0.025), static=True)
        b = box_body("b", (0.035, 0.0, 0.025), static=True)
        with pytest.raises(SceneError, match="overlap"):
            reset(scene_desc(a, b), seed=0)

    def test_touching_statics_allowed(self):
        a = box_body("a", (0.0, 0.0, 0.025), static=True)
        b = box_body("b", (0.07, 0.0, 0.025), static=True)
        reset(scene_desc(a, b), seed=0)

    def test_malformed_descriptions(self):
        with pytest.raises(SceneError, match="schema_version"):
            reset({"bodies": []}, seed=0)
        with pytest.raises(SceneError, match="shape"):
            reset({"schema_version": 1, "bodies": [{"id": "x"}]}, seed=0)
        with pytest.raises(SceneError, match="positive"):
            reset(
                {
                    "schema_version": 1,
                    "bodies": [
                        {"id": "x", "shape": {"type": "box", "half_extents": [0, 1, 1]}}
                    ],
                },
                seed=0,
            )
        with pytest.raises(SceneError, match="duplicate"):
            reset(scene_desc(box_body("d", (0, 0, 0.1)), box_body("d", (0.2, 0, 0.1))), seed=0)


class TestStep:
    def test_free_space_motion_zero_wrench(self):
        st = reset(scene_desc(), seed=0)
        l, r = hold_targets(st)
        st2, wl, wr = step(st, down_target([-0.25, -0.26, 0.20]), r)
        assert wl.is_zero() and wr.is_zero()
        assert st2.tick == st.tick + 1

    def test_spring_law_table_press(self):
        # Tip sphere (r = 12 mm) center at z = 10 mm: 2 mm penetration of the
        # table plane. Held stationary, the reaction is exactly k_p * d = 1 N up.
        st = reset(scene_desc(), seed=0)
        params = st.params
        press = Pose(np.array([0.0, -0.10, params.tip_radius - 0.002]))
        st, _, _ = drive_to(st, "right", press)
        l, _ = hold_targets(st)
        st2, _, wr = step(st, l, CartesianTarget(press, 1.0))
        assert wr.force[2] == pytest.approx(params.k_p * 0.002, abs=1e-9)
        assert abs(wr.force[0]) < 1e-9 and abs(wr.force[1]) < 1e-9

    def test_motion_clamped_per_step(self):
        st = reset(scene_desc(), seed=0)
        params = st.params
        far = Pose(np.array([0.25, 0.2, 0.4]), quat_from_axis_angle([0, 0, 1], 1.5))
        before = st.robot.right_ee
        l, _ = hold_targets(st)
        st2, _, _ = step(st, l, CartesianTarget(far, 1.0))
        after = st2.robot.right_ee
        assert np.linalg.norm(after.position - before.position) <= params.max_step_translation + 1e-12
        from efmbench.geometry import quat_angle

        assert quat_angle(before.quat, after.quat) <= params.max_step_rotation + 1e-12

    def test_nonfinite_target_rejected(self):
        st = reset(scene_desc(), seed=0)
        l, r = hold_targets(st)
        with pytest.raises((SceneError, ValueError)):
            step(st, CartesianTarget(Pose(np.array([np.nan, 0, 0.2])), 1.0), r)

    def test_push_action_reaction(self):
        box = box_body("crate", (0.10, 0.0, 0.025))
        st = reset(scene_desc(box), seed=3)
        # Approach from -x and shove into the box side.
        st, _, _ = drive_to(st, "right", Pose(np.array([0.04, 0.0, 0.025])))
        l, _ = hold_targets(st)
        st2, _, wr = step(st, l, down_target([0.09, 0.0, 0.025]))
        assert "crate" in st2.push_forces
        # The box moved out of the way and the reaction matches the wrench.
        assert st2.poses["crate"].position[0] > 0.10
        np.testing.assert_allclose(st2.push_forces["crate"], -wr.force, atol=1e-9)

    def test_penetration_bound_under_sustained_press(self):
        st = reset(scene_desc(), seed=0)
        params = st.params
        target = Pose(np.array([0.0, -0.1, -0.05]))  # well below the table
        for _ in range(6):
            l, _ = hold_targets(st)
            st, _, _ = step(st, l, CartesianTarget(target, 1.0))
            depth = params.tip_radius - st.robot.right_ee.position[2]
            assert depth <= params.max_penetration + 1e-9

    def test_determinism_bitwise(self):
        box = box_body("crate", (0.10, 0.0, 0.025), grasp={"anchor": [0, 0, 0.025], "radius": 0.04})
        desc = scene_desc(box)
        runs = []
        for _ in range(2):
            st = reset(desc, seed=11)
            stream = []
            for k in range(25):
                l, r = hold_targets(st)
                t = down_target([0.10, 0.0, 0.06 + 0.01 * np.sin(k)], grip=(0.0 if k > 8 else 1.0))
                st, wl, wr = step(st, l, t)
                stream.append(np.concatenate([st.robot.to_array(), wl.to_array(), wr.to_array()]))
            runs.append(np.array(stream))
        assert np.array_equal(runs[0], runs[1])


class TestGraspRelease:
    def grasp_scene(self, jitter_t=None, jitter_r=None):
        box = box_body(
            "toy",
            (0.10, 0.0, 0.015),
            half=(0.015, 0.015, 0.015),
            grasp={
                "anchor": [0, 0, 0.015],
                "radius": 0.04,
                "hold_offset": {"position": [0, 0, 0.03]},
            },
        )
        params = SimParams()
        if jitter_t is not None:
            from dataclasses import replace

            params = replace(params, grasp_jitter_t=jitter_t, grasp_jitter_r=jitter_r)
        st = reset(scene_desc(box), seed=21, params=params)
        st, _, _ = drive_to(st, "right", Pose(np.array([0.10, 0.0, 0.033])))
        return st

    def test_grasp_deterministic(self):
        offs = []
        for _ in range(2):
            st = grasp(self.grasp_scene(), "right")
            offs.append(st.attachments["right"].offset.to_array())
        assert np.array_equal(offs[0], offs[1])

    def test_zero_jitter_gives_nominal(self):
        st = grasp(self.grasp_scene(jitter_t=0.0, jitter_r=0.0), "right")
        off = st.attachments["right"].offset
        np.testing.assert_allclose(off.position, [0, 0, 0.03], atol=1e-12)
        np.testing.assert_allclose(off.quat, [1, 0, 0, 0], atol=1e-12)

    def test_grasp_failed_is_noop(self):
        st = self.grasp_scene()
        st, _, _ = drive_to(st, "right", Pose(np.array([0.3, -0.2, 0.2])))
        st2 = grasp(st, "right")
        assert st2.attachments == {}
        assert ("grasp_failed", "right") in st2.events

    def test_jitter_spread_monte_carlo(self):
        from efmbench.geometry import quat_angle

        params = SimParams()
        trans, angs = [], []
        box = box_body(
            "toy",
            (0.10, 0.0, 0.015),
            half=(0.015, 0.015, 0.015),
            grasp={"anchor": [0, 0, 0.015], "radius": 0.04, "hold_offset": {"position": [0, 0, 0.03]}},
        )
        desc = scene_desc(box)
        for seed in range(1000):
            st = reset(desc, seed=seed)
            st, _, _ = drive_to(st, "right", Pose(np.array([0.10, 0.0, 0.033])))
            st = grasp(st, "right")
            off = st.attachments["right"].offset
            trans.append(np.linalg.norm(off.position - np.array([0, 0, 0.03])))
            angs.append(quat_angle(off.quat, np.array([1, 0, 0, 0])))
        trans, angs = np.array(trans), np.array(angs)
        assert np.all(trans <= params.grasp_jitter_t + 1e-12)
        assert np.all(angs <= params.grasp_jitter_r + 1e-9)
        assert trans.std() > 1e-4 and angs.std() > 1e-3

    def test_attachment_rigidity(self):
        st = grasp(self.grasp_scene(), "right")
        att = st.attachments["right"]
        for k in range(10):
            l, _ = hold_targets(st)
            st, _, _ = step(st, l, down_target([0.1 - 0.01 * k, 0.02 * k, 0.1], grip=0.0))
            expect = st.robot.right_ee.compose(att.offset)
            assert np.array_equal(st.poses["toy"].to_array(), expect.to_array())

    def test_release_settles_on_table(self):
        st = grasp(self.grasp_scene(), "right")
        st, _, _ = drive_to(st, "right", Pose(np.array([-0.05, -0.1, 0.15])), grip=0.0)
        st = release(st, "right")
        assert st.attachments == {}
        # The (jitter-rotated) box rests with its lowest point on the table.
        from efmbench.sim.world import _world_aabb

        lo, _ = _world_aabb(st.body("toy"), st.poses["toy"])
        assert lo[2] == pytest.approx(0.0, abs=1e-12)

    def test_release_settles_on_coaster(self):
        coaster = {
            "id": "coaster",
            "shape": {"type": "cylinder", "radius": 0.032, "half_height": 0.002},
            "pose": {"position": [-0.05, -0.10, 0.002]},
            "color": "black",
            "static": True,
        }
        box = box_body(
            "toy",
            (0.10, 0.0, 0.015),
            half=(0.015, 0.015, 0.015),
            grasp={"anchor": [0, 0, 0.015], "radius": 0.04, "hold_offset": {"position": [0, 0, 0.03]}},
        )
        st = reset(scene_desc(coaster, box), seed=5)
        st, _, _ = drive_to(st, "right", Pose(np.array([0.10, 0.0, 0.033])))
        st = grasp(st, "right")
        st, _, _ = drive_to(st, "right", Pose(np.array([-0.05, -0.1, 0.15])), grip=0.0)
        st = release(st, "right")
        from efmbench.sim.world import _world_aabb

        lo, _ = _world_aabb(st.body("toy"), st.poses["toy"])
        assert lo[2] == pytest.approx(0.004, abs=1e-12)

    def test_release_nothing_noop(self):
        st = reset(scene_desc(), seed=0)
        st2 = release(st, "left")
        assert st2.poses == st.poses
        assert st2.attachments == {}


class TestContactWrench:
    def plug_scene(self):
        host = {
            "id": "charger",
            "shape": {"type": "box", "half_extents": [0.025, 0.025, 0.0125]},
            "pose": {"position": [0.1, 0.1, 0.0125]},
            "color": "white",
            "static": True,
            "sockets": [
                {
                    "name": "port",
                    "mouth": [0, 0, 0.0125],
                    "axis": [0, 0, -1],
                    "clearance": 0.002,
                    "chamfer_radius": 0.0065,
                    "chamfer_depth": 0.008,
                    "depth": 0.01,
                    "full_depth": 0.008,
                }
            ],
        }
        light = {
            "id": "light",
            "shape": {"type": "box", "half_extents": [0.009, 0.02, 0.006]},
            "pose": {"position": [0.1, 0.1, 0.061]},
            "color": "black",
            "grasp": {"anchor": [0, 0, 0.006], "radius": 0.04, "hold_offset": {"position": [0, 0, 0.018]}},
            "plug": {"tip": [0, 0, -0.016], "radius": 0.0015},
        }
        return reset(scene_desc(host, light), seed=0)

    def test_no_contact_zero(self):
        st = self.plug_scene()
        w = compute_contact_wrench(Pose(np.array([0.0, -0.2, 0.3])), None, st)
        assert w.is_zero()

    def test_centered_descent_dominant_axial(self):
        st = self.plug_scene()
        # Tip 4 mm into the bore, descending 5 mm over the last tick.
        poses = dict(st.poses)
        tip_local_z = -0.016
        s = 0.012  # below the countersink, inside the bore
        zc = 0.025 - s - tip_local_z
        poses["light"] = Pose(np.array([0.1, 0.1, zc]))
        from efmbench.sim.scene import with_updates

        st = with_updates(st, poses=poses)
        ee_now = Pose(np.array([0.1, 0.1, zc + 0.018]))
        ee_prev = Pose(np.array([0.1, 0.1, zc + 0.018 + 0.005]))
        # Held pose must track the EE for the velocity to be meaningful.
        w = compute_contact_wrench(ee_now, "light", st, prev_ee_pose=ee_prev)
        fz, flat = abs(w.force[2]), np.hypot(w.force[0], w.force[1])
        assert fz > 0.0
        assert flat < 1e-9
        assert w.force[2] > 0  # opposes the descent

    def test_offset_contact_lateral_exceeds_vertical(self):
        st = self.plug_scene()
        poses = dict(st.poses)
        clearance = 0.002
        lat = 2 * clearance
        # Tip pressed into the countersink cone at 2x clearance offset.
        k = 0.008 / (0.0065 - 0.002)
        s_cone = k * (0.0065 - lat)
        s = s_cone + 0.0011
        zc = 0.025 - s + 0.016
        poses["light"] = Pose(np.array([0.1 + lat, 0.1, zc]))
        from efmbench.sim.scene import with_updates

        st = with_updates(st, poses=poses)
        w = compute_contact_wrench(Pose(np.array([0.1 + lat, 0.1, zc + 0.018])), "light", st)
        f_lat = np.hypot(w.force[0], w.force[1])
        assert f_lat > abs(w.force[2]) > 0
        # Centering: lateral force points back toward the hole axis.
        assert w.force[0] < 0

    def test_wrench_zero_iff_no_contact(self):
        st = reset(scene_desc(box_body("b", (0.1, 0, 0.025), static=True)), seed=0)
        params = st.params
        clear = compute_contact_wrench(Pose(np.array([0.1, 0.0, 0.2])), None, st)
        assert clear.is_zero()
        touching = compute_contact_wrench(
            Pose(np.array([0.1, 0.0, 0.05 + params.tip_radius - 0.001])), None, st
        )
        assert not touching.is_zero()
