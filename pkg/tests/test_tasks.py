import numpy as np
import pytest

from efmbench.geometry import Pose
from efmbench.sim.scene import with_updates
from efmbench.tasks import (
    TASK_IDS,
    TaskError,
    check_success,
    instantiate_task,
    load_spec,
    task_predicate,
)

TABLE_II_VARIATIONS = {
    "toy_find": 8,
    "toy_match": 5,
    "cup_hang": 9,
    "cup_place": 6,
    "box_push": 4,
    "light_plug": 6,
    "bread_brush": 20,
    "nail_knock": 1,
    "cable_match": 8,
    "charger_plug": 12,
}


class TestCards:
    def test_variation_counts_match_table(self):
        for tid, count in TABLE_II_VARIATIONS.items():
            assert load_spec(tid).variation_count == count

    def test_unknown_task_rejected(self):
        with pytest.raises(TaskError, match="unknown task"):
            instantiate_task("toy_sort", seed=0)


class TestInstantiate:
    def test_variation_in_range(self):
        for seed in range(20):
            inst = instantiate_task("toy_find", seed)
            assert 0 <= inst.variation_id < 8

    def test_nail_knock_single_variation(self):
        for seed in (0, 17, 991):
            assert instantiate_task("nail_knock", seed).variation_id == 0

    def test_charger_plug_uniform_histogram(self):
        # Chi-square over 1000 seeded draws against uniform(12);
        # chi2 critical at p=0.001 with 11 dof is 31.3.
        counts = np.zeros(12)
        for seed in range(1000):
            counts[instantiate_task("charger_plug", seed).variation_id] += 1
        expected = 1000 / 12
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        assert chi2 < 31.3

    def test_instruction_resolved(self):
        for tid in TASK_IDS:
            for seed in (0, 5):
                inst = instantiate_task(tid, seed)
                assert "[" not in inst.instruction and "]" not in inst.instruction
                assert inst.instruction

    def test_deterministic(self):
        for tid in TASK_IDS:
            a = instantiate_task(tid, 123)
            b = instantiate_task(tid, 123)
            assert a.variation_id == b.variation_id
            assert a.instruction == b.instruction
            assert a.description == b.description
            for bid in a.scene.poses:
                assert np.array_equal(a.scene.poses[bid].to_array(), b.scene.poses[bid].to_array())

    def test_exactly_one_matching_candidate(self):
        for tid, key in (("toy_match", "toy"), ("cable_match", "cable")):
            for seed in range(60):
                inst = instantiate_task(tid, seed)
                required = inst.info["required_color"]
                matches = [
                    b.id
                    for b in inst.scene.bodies
                    if b.id.startswith(key) and b.color == required
                ]
                assert matches == [inst.info["target_body"]], (tid, seed)

    def test_scenes_are_valid(self):
        # Every task and a spread of seeds must build without overlap errors.
        for tid in TASK_IDS:
            for seed in range(12):
                inst = instantiate_task(tid, seed)
                assert inst.scene.tick == 0


class TestSuccess:
    def test_box_inside_area_succeeds(self):
        inst = instantiate_task("box_push", 3)
        area = np.asarray(inst.info["area_world"])
        poses = dict(inst.scene.poses)
        poses["box"] = Pose(np.array([area[0] + 0.01, area[1] - 0.005, 0.025]))
        scene = with_updates(inst.scene, poses=poses)
        report = check_success(inst, scene, current_step=40)
        assert report is not None and report.success
        assert report.failure_reason == "none"

    def test_box_outside_area_in_progress(self):
        inst = instantiate_task("box_push", 3)
        assert check_success(inst, inst.scene, current_step=10) is None

    def test_wrong_color_cable_classified(self):
        inst = instantiate_task("cable_match", 2)
        wrong = next(c for c in inst.info["candidates"] if c != inst.info["target_body"])
        host = inst.scene.body(inst.info["host_body"])
        spec = next(s for s in host.sockets if s.name == inst.info["socket"])
        mouth = inst.scene.poses[inst.info["host_body"]].transform_point(spec.mouth)
        body = inst.scene.body(wrong)
        depth = 0.6 * spec.full_depth
        poses = dict(inst.scene.poses)
        poses[wrong] = Pose(mouth - np.array([0, 0, depth]) - body.plug.tip)
        scene = with_updates(inst.scene, poses=poses)
        report = check_success(inst, scene, current_step=50)
        assert report is not None
        assert report.failure_reason == "wrong_semantic_choice"

    def test_shallow_plug_is_mispositioning(self):
        inst = instantiate_task("light_plug", 4)
        host = inst.scene.body(inst.info["host_body"])
        spec = next(s for s in host.sockets if s.name == inst.info["socket"])
        mouth = inst.scene.poses[inst.info["host_body"]].transform_point(spec.mouth)
        body = inst.scene.body(inst.info["target_body"])
        depth = 0.4 * spec.full_depth
        poses = dict(inst.scene.poses)
        poses[inst.info["target_body"]] = Pose(mouth - np.array([0, 0, depth]) - body.plug.tip)
        scene = with_updates(inst.scene, poses=poses)
        ok, wrong = task_predicate(inst, scene)
        assert not ok and not wrong
        report = check_success(
            inst,
            scene,
            current_step=inst.spec.time_limit_steps,
            decision={"step": 120, "area_visible": True},
        )
        assert report.failure_reason == "mis_positioning"
        assert report.step_of_decision == 120

    def test_occluded_decision_classified(self):
        inst = instantiate_task("cup_place", 1)
        report = check_success(
            inst,
            inst.scene,
            current_step=inst.spec.time_limit_steps,
            decision={"step": 88, "area_visible": False},
        )
        assert report.failure_reason == "occlusion_misplacement"

    def test_timeout_without_decision(self):
        inst = instantiate_task("toy_find", 9)
        report = check_success(inst, inst.scene, current_step=inst.spec.time_limit_steps)
        assert report.failure_reason == "timeout"
        assert not report.success

    def test_success_report_invariant(self):
        from efmbench.tasks.success import SuccessReport

        with pytest.raises(ValueError):
            SuccessReport(True, "timeout", 3)
        with pytest.raises(ValueError):
            SuccessReport(False, "none", 3)
