import json

import numpy as np
import pytest

from efmbench.data import (
    Episode,
    EpisodeError,
    compute_stats,
    merge_stats,
    pack,
    read_episode,
    write_episode,
)
from efmbench.data.stats import mean_duration_s


def synth_episode(seed, task_id="box_push", frames=None, obs_mode="symbolic"):
    rng = np.random.default_rng(seed)
    t = frames if frames is not None else int(rng.integers(2, 12))
    states = rng.normal(0, 0.3, size=(t, 16)).astype(np.float32)
    # Valid quaternions and grippers.
    for sl in (slice(3, 7), slice(10, 14)):
        q = rng.normal(size=(t, 4))
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        q[q[:, 0] < 0] *= -1
        states[:, sl] = q.astype(np.float32)
    states[:, 14:16] = rng.uniform(0, 1, size=(t, 2)).astype(np.float32)
    actions = rng.normal(0, 0.3, size=(t, 16)).astype(np.float32)
    for sl in (slice(3, 7), slice(11, 15)):
        q = rng.normal(size=(t, 4))
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        q[q[:, 0] < 0] *= -1
        actions[:, sl] = q.astype(np.float32)
    actions[:, 7] = rng.uniform(0, 1, size=t).astype(np.float32)
    actions[:, 15] = rng.uniform(0, 1, size=t).astype(np.float32)
    payload = [
        {"head": {"camera": "head", "objects": [], "sockets": []}} for _ in range(t)
    ]
    return Episode(
        task_id=task_id,
        instruction="Push the box to the lined area",
        variation_id=int(rng.integers(0, 4)),
        seed=int(seed),
        view_mode="area_ee",
        obs_mode=obs_mode,
        success=bool(rng.integers(0, 2)),
        failure_reason="none",
        operating_arm="right",
        camera_arm="left",
        states=states,
        actions=actions,
        wrench_left=rng.normal(0, 2, size=(t, 6)).astype(np.float32),
        wrench_right=rng.normal(0, 2, size=(t, 6)).astype(np.float32),
        flags=rng.integers(0, 2, size=(t, 4)).astype(np.float32),
        symbolic=payload,
        phases=[{"name": "push", "start": 0, "end": t - 1, "manipulation": True,
                 "hand_held": False, "camera_arm": "left", "operating_arm": "right"}],
        intrinsics={"head": {"fx": 55.4, "fy": 55.4}},
    )


def fix_success(ep):
    # keep the success/failure_reason invariant
    ep.failure_reason = "none" if ep.success else "timeout"
    return ep


class TestRoundTrip:
    def test_write_read_identity(self, tmp_path):
        ep = fix_success(synth_episode(3))
        loc = write_episode(ep, tmp_path)
        back = read_episode(loc)
        assert back.numeric_equal(ep)
        assert back.symbolic == ep.symbolic
        assert back.phases == ep.phases
        assert back.seed == ep.seed

    def test_byte_stability(self, tmp_path):
        ep = fix_success(synth_episode(7))
        loc1 = write_episode(ep, tmp_path / "a")
        loc2 = write_episode(ep, tmp_path / "b")
        for name in ("manifest.json", "frames.bin", "symbolic.json"):
            assert (loc1 / name).read_bytes() == (loc2 / name).read_bytes()

    def test_duration_follows_frame_count(self, tmp_path):
        ep = fix_success(synth_episode(1, frames=146))
        loc = write_episode(ep, tmp_path)
        manifest = json.loads((loc / "manifest.json").read_text())
        assert manifest["frame_count"] == 146
        assert manifest["fps"] == 10
        assert read_episode(loc).duration_s == pytest.approx(14.6)

    def test_pixels_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        ep = fix_success(synth_episode(11, frames=3, obs_mode="pixels"))
        ep.symbolic = None
        ep.images = [
            {"head": rng.integers(0, 255, size=(64, 64, 3), dtype=np.uint8)}
            for _ in range(3)
        ]
        loc = write_episode(ep, tmp_path)
        back = read_episode(loc)
        for a, b in zip(ep.images, back.images):
            assert np.array_equal(a["head"], b["head"])


class TestValidation:
    def test_nan_rejected_before_write(self, tmp_path):
        ep = fix_success(synth_episode(5))
        ep.wrench_left[0, 0] = np.nan
        with pytest.raises(EpisodeError, match="non-finite"):
            write_episode(ep, tmp_path)
        assert not any(tmp_path.rglob("frames.bin"))  # no residue

    def test_corrupt_length_detected(self, tmp_path):
        ep = fix_success(synth_episode(9))
        loc = write_episode(ep, tmp_path)
        raw = (loc / "frames.bin").read_bytes()
        (loc / "frames.bin").write_bytes(raw[:-4])
        with pytest.raises(EpisodeError, match="bytes, expected"):
            read_episode(loc)

    def test_manifest_count_mismatch(self, tmp_path):
        ep = fix_success(synth_episode(10, frames=5))
        loc = write_episode(ep, tmp_path)
        manifest = json.loads((loc / "manifest.json").read_text())
        manifest["frame_count"] = 4
        (loc / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(EpisodeError):
            read_episode(loc)

    def test_future_schema_rejected(self, tmp_path):
        ep = fix_success(synth_episode(12))
        loc = write_episode(ep, tmp_path)
        manifest = json.loads((loc / "manifest.json").read_text())
        manifest["schema_version"] = 99
        (loc / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(EpisodeError, match="schema_version"):
            read_episode(loc)

    def test_quantization_error_bound(self):
        # float32 carries ~7 significant digits: relative error under 6e-5.
        rng = np.random.default_rng(0)
        vals = rng.uniform(-30, 30, size=20000)
        q = vals.astype(np.float32).astype(np.float64)
        nz = np.abs(vals) > 1e-12
        rel = np.abs(q[nz] - vals[nz]) / np.abs(vals[nz])
        assert rel.max() <= 6e-5


class TestStats:
    def test_table_style_row(self, tmp_path):
        for k in range(4):
            ep = fix_success(synth_episode(k, task_id="toy_find", frames=146))
            ep.variation_id = k % 3
            write_episode(ep, tmp_path)
        stats = compute_stats(tmp_path)
        row = stats.per_task["toy_find"]
        assert row.episode_count == 4
        assert row.avg_length_s == 14.6
        assert row.variation_count_observed == 3

    def test_single_frame_episode(self, tmp_path):
        write_episode(fix_success(synth_episode(1, frames=1)), tmp_path)
        stats = compute_stats(tmp_path)
        assert stats.per_task["box_push"].avg_length_s == 0.1

    def test_variations_observed_set_cardinality(self, tmp_path):
        for seed, var in enumerate((0, 3, 3, 7)):
            ep = fix_success(synth_episode(seed, task_id="cable_match"))
            ep.variation_id = var
            write_episode(ep, tmp_path)
        stats = compute_stats(tmp_path)
        assert stats.per_task["cable_match"].variation_count_observed == 3

    def test_empty_root_error(self, tmp_path):
        with pytest.raises(EpisodeError, match="no episodes"):
            compute_stats(tmp_path)

    def test_merge_linearity(self, tmp_path):
        a_root, b_root, u_root = tmp_path / "a", tmp_path / "b", tmp_path / "u"
        for k in range(3):
            ep = fix_success(synth_episode(k, frames=10 + k))
            write_episode(ep, a_root)
            write_episode(ep, u_root)
        for k in range(3, 7):
            ep = fix_success(synth_episode(k, frames=20 + k))
            write_episode(ep, b_root)
            write_episode(ep, u_root)
        merged = merge_stats(compute_stats(a_root), compute_stats(b_root))
        union = compute_stats(u_root)
        mt, ut = merged.per_task["box_push"], union.per_task["box_push"]
        assert mt.episode_count == ut.episode_count
        assert mt.avg_length_s == ut.avg_length_s

    def test_rounding_is_exact_rational_half_up(self):
        assert mean_duration_s(146, 1) == 14.6
        assert mean_duration_s(145, 10) == 1.5  # 1.45 rounds up
        assert mean_duration_s(1, 1) == 0.1


class TestPack:
    def test_pack_contains_all_files(self, tmp_path):
        import tarfile

        for k in range(2):
            write_episode(fix_success(synth_episode(k)), tmp_path / "data")
        out = pack(tmp_path / "data", tmp_path / "bundle.tar")
        with tarfile.open(out) as tf:
            names = tf.getnames()
        assert any(n.endswith("manifest.json") for n in names)
        assert any(n.endswith("frames.bin") for n in names)
