import json
import os

import pytest

from efmbench.cli import EXIT_CONFIG, EXIT_OK, main


def run_cli(args):
    return main(args)


class TestGenerate:
    def test_counts_and_summary(self, tmp_path, capsys):
        rc = run_cli(
            ["generate", "--task", "box_push", "--count", "4", "--out", str(tmp_path)]
        )
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        assert "Box-Push" in out
        dirs = sorted((tmp_path / "task_box_push").glob("ep_*"))
        assert len(dirs) == 4

    def test_zero_count_noop(self, tmp_path, capsys):
        rc = run_cli(
            ["generate", "--task", "box_push", "--count", "0", "--out", str(tmp_path)]
        )
        assert rc == EXIT_OK
        assert "nothing to generate" in capsys.readouterr().out

    def test_unknown_task_config_error(self, tmp_path):
        rc = run_cli(["generate", "--task", "box_lift", "--count", "1", "--out", str(tmp_path)])
        assert rc == EXIT_CONFIG

    def test_unwritable_path(self, tmp_path):
        # A directory cannot be created underneath a regular file.
        blocker = tmp_path / "occupied"
        blocker.write_text("")
        rc = run_cli(
            ["generate", "--task", "box_push", "--count", "1", "--out", str(blocker / "x")]
        )
        assert rc == EXIT_CONFIG

    def test_idempotent_artifacts(self, tmp_path):
        args = ["generate", "--task", "light_plug", "--count", "2", "--out", str(tmp_path)]
        assert run_cli(args) == EXIT_OK
        first = {
            p.relative_to(tmp_path): p.read_bytes()
            for p in sorted(tmp_path.rglob("*"))
            if p.is_file()
        }
        assert run_cli(args) == EXIT_OK
        second = {
            p.relative_to(tmp_path): p.read_bytes()
            for p in sorted(tmp_path.rglob("*"))
            if p.is_file()
        }
        assert first == second


class TestStatsReplay:
    def test_stats_on_generated(self, tmp_path, capsys):
        run_cli(["generate", "--task", "box_push", "--count", "2", "--out", str(tmp_path)])
        rc = run_cli(["stats", "--out", str(tmp_path)])
        assert rc == EXIT_OK
        assert "box_push" in capsys.readouterr().out

    def test_stats_empty_errors(self, tmp_path):
        assert run_cli(["stats", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_replay_zero_divergence(self, tmp_path, capsys):
        run_cli(["generate", "--task", "box_push", "--count", "1", "--out", str(tmp_path)])
        ep_dir = sorted((tmp_path / "task_box_push").glob("ep_*"))[0]
        rc = run_cli(["replay", str(ep_dir)])
        assert rc == EXIT_OK
        assert "max state divergence 0" in capsys.readouterr().out

    def test_replay_truncated_errors(self, tmp_path, capsys):
        run_cli(["generate", "--task", "box_push", "--count", "1", "--out", str(tmp_path)])
        ep_dir = sorted((tmp_path / "task_box_push").glob("ep_*"))[0]
        raw = (ep_dir / "frames.bin").read_bytes()
        (ep_dir / "frames.bin").write_bytes(raw[: len(raw) // 2])
        rc = run_cli(["replay", str(ep_dir)])
        assert rc == EXIT_CONFIG


class TestEval:
    def test_expert_endpoint_small(self, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        rc = run_cli(
            [
                "eval",
                "--endpoint",
                "expert",
                "--task",
                "box_push",
                "--trials",
                "2",
                "--report",
                str(report_path),
            ]
        )
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        assert "Box-Push" in out and "100.0" in out
        report = json.loads(report_path.read_text())
        assert report["per_task"]["box_push"]["successes"] == 2

    def test_unknown_task_usage_error(self):
        assert run_cli(["eval", "--endpoint", "expert", "--task", "nope"]) == EXIT_CONFIG

    def test_no_ensemble_open_loop(self):
        rc = run_cli(
            ["eval", "--endpoint", "expert", "--task", "light_plug", "--trials", "1",
             "--no-ensemble"]
        )
        assert rc == EXIT_OK


class TestTasksCommand:
    def test_lists_all_cards(self, capsys):
        assert run_cli(["tasks"]) == EXIT_OK
        out = capsys.readouterr().out
        for tid in ("toy_find", "charger_plug", "bread_brush"):
            assert tid in out

    def test_verbose_shows_templates(self, capsys):
        run_cli(["tasks", "-v"])
        out = capsys.readouterr().out
        assert "[The-Required-Color]" in out
