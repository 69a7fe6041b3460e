"""Episode dataset reader and batch assembly.

Parses the benchmark's on-disk episode layout directly (manifest.json +
frames.bin + symbolic.json; frames are 49 little-endian float32 per row:
step index, state 16, action 16, wrench left 6, wrench right 6, flags 4).

A training sample is one frame: the symbolic observation and robot state
at t, the action chunk for t..t+7, and the operating arm's future wrench
chunk for t+1..t+8. Episodes shorter than the horizon are end-padded
with their last frame and the pad mask records it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FRAME_WIDTH = 49
HORIZON = 8
ACTION_DIM = 16
FORCE_DIM = 6


@dataclass
class EpisodeRecord:
    task_id: str
    seed: int
    instruction: str
    operating_arm: str
    states: np.ndarray  # (T, 16)
    actions: np.ndarray  # (T, 16)
    wrench_left: np.ndarray  # (T, 6)
    wrench_right: np.ndarray  # (T, 6)
    symbolic: list  # per frame: {camera: record}

    @property
    def frames(self) -> int:
        return len(self.states)

    def operating_wrench(self) -> np.ndarray:
        return self.wrench_left if self.operating_arm == "left" else self.wrench_right


def load_episode(path) -> EpisodeRecord:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    if manifest.get("schema_version") != 1:
        raise ValueError(f"unsupported episode schema at {path}")
    t = int(manifest["frame_count"])
    mat = np.frombuffer((path / "frames.bin").read_bytes(), dtype="<f4").reshape(
        t, FRAME_WIDTH
    )
    if manifest["obs_mode"] != "symbolic":
        raise ValueError("this policy stack trains on symbolic episodes")
    symbolic = json.loads((path / "symbolic.json").read_text())
    return EpisodeRecord(
        task_id=manifest["task_id"],
        seed=int(manifest["seed"]),
        instruction=manifest["instruction"],
        operating_arm=manifest["operating_arm"],
        states=mat[:, 1:17].astype(np.float64),
        actions=mat[:, 17:33].astype(np.float64),
        wrench_left=mat[:, 33:39].astype(np.float64),
        wrench_right=mat[:, 39:45].astype(np.float64),
        symbolic=symbolic,
    )


def discover_episodes(root, task_id=None) -> list:
    root = Path(root)
    out = []
    pattern = f"task_{task_id}" if task_id else "task_*"
    for task_dir in sorted(root.glob(pattern)):
        for ep_dir in sorted(task_dir.glob("ep_*")):
            if (ep_dir / "manifest.json").exists():
                out.append(ep_dir)
    return out


@dataclass
class SampleSet:
    """Flat arrays indexed by (episode, frame) pairs for fast batching."""

    episodes: list
    index: list  # (episode idx, t)
    force_mean: np.ndarray
    force_std: np.ndarray

    def __len__(self):
        return len(self.index)


def build_sample_set(episode_dirs) -> SampleSet:
    episodes = [load_episode(p) for p in episode_dirs]
    index = [(i, t) for i, ep in enumerate(episodes) for t in range(ep.frames)]
    wrenches = np.concatenate([ep.operating_wrench() for ep in episodes], axis=0)
    std = wrenches.std(axis=0)
    return SampleSet(
        episodes=episodes,
        index=index,
        force_mean=wrenches.mean(axis=0),
        force_std=np.where(std < 1e-6, 1.0, std),
    )


def chunk_targets(ep: EpisodeRecord, t: int):
    """(action chunk (8, 16), future wrench chunk (8, 6), pad mask (8,))."""
    last = ep.frames - 1
    acts = np.empty((HORIZON, ACTION_DIM))
    force = np.empty((HORIZON, FORCE_DIM))
    mask = np.zeros(HORIZON, dtype=bool)
    wr = ep.operating_wrench()
    for k in range(HORIZON):
        idx = t + k
        if idx > last:
            idx = last
            mask[k] = True
        acts[k] = ep.actions[idx]
        force[k] = wr[min(idx + 1, last)]
    return acts, force, mask
