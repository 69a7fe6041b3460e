"""Dataset statistics: per-task episode counts, observed variations, and
mean duration (seconds, one decimal, exact rational then half-up)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .episode import FPS, EpisodeError
from .io import iter_episode_dirs


@dataclass(frozen=True)
class TaskStats:
    task_id: str
    episode_count: int
    variation_count_observed: int
    avg_length_s: float
    total_frames: int


@dataclass(frozen=True)
class DatasetStats:
    per_task: dict  # task_id -> TaskStats

    def total_episodes(self) -> int:
        return sum(t.episode_count for t in self.per_task.values())


def round_half_up_tenths(value: Fraction) -> float:
    """Round a rational number of seconds to one decimal, ties away from zero."""
    tenths = value * 10
    floor = tenths.numerator // tenths.denominator
    rem = tenths - floor
    if rem * 2 >= 1:
        floor += 1
    return floor / 10.0


def mean_duration_s(total_frames: int, episodes: int) -> float:
    return round_half_up_tenths(Fraction(total_frames, FPS * episodes))


def compute_stats(dataset_root) -> DatasetStats:
    root = Path(dataset_root)
    frames = {}
    counts = {}
    variations = {}
    for ep_dir in iter_episode_dirs(root):
        manifest = json.loads((ep_dir / "manifest.json").read_text())
        tid = manifest["task_id"]
        counts[tid] = counts.get(tid, 0) + 1
        frames[tid] = frames.get(tid, 0) + int(manifest["frame_count"])
        variations.setdefault(tid, set()).add(int(manifest["variation_id"]))
    if not counts:
        raise EpisodeError(f"no episodes found under {root}")
    per_task = {
        tid: TaskStats(
            task_id=tid,
            episode_count=counts[tid],
            variation_count_observed=len(variations[tid]),
            avg_length_s=mean_duration_s(frames[tid], counts[tid]),
            total_frames=frames[tid],
        )
        for tid in sorted(counts)
    }
    return DatasetStats(per_task=per_task)


def merge_stats(a: DatasetStats, b: DatasetStats) -> DatasetStats:
    """Stats of a disjoint union: counts add, durations combine by weight.

    Observed-variation counts are not mergeable from counts alone, so the
    merged value is a lower bound (max of the two)."""
    per_task = {}
    for tid in sorted(set(a.per_task) | set(b.per_task)):
        ta, tb = a.per_task.get(tid), b.per_task.get(tid)
        if ta is None or tb is None:
            per_task[tid] = ta or tb
            continue
        episodes = ta.episode_count + tb.episode_count
        frames = ta.total_frames + tb.total_frames
        per_task[tid] = TaskStats(
            task_id=tid,
            episode_count=episodes,
            variation_count_observed=max(
                ta.variation_count_observed, tb.variation_count_observed
            ),
            avg_length_s=mean_duration_s(frames, episodes),
            total_frames=frames,
        )
    return DatasetStats(per_task=per_task)


def format_stats_table(stats: DatasetStats, names: dict | None = None) -> str:
    lines = [f"{'Task':<14} {'# Variations':>12} {'# Traj.':>8} {'Avg. Len. (s)':>14}"]
    for tid, t in stats.per_task.items():
        label = (names or {}).get(tid, tid)
        lines.append(
            f"{label:<14} {t.variation_count_observed:>12} {t.episode_count:>8} "
            f"{t.avg_length_s:>14.1f}"
        )
    lines.append(f"total trajectories: {stats.total_episodes()}")
    return "\n".join(lines)
