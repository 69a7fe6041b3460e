"""Behavior-cloning training loop and checkpointing."""

from __future__ import annotations

import argparse
import json
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from .data import build_sample_set, chunk_targets, discover_episodes
from .features import frame_features
from .model import PolicyConfig, batch_to_tensors, build_policy, train_step

CHECKPOINT_VERSION = 1


def sample_features(sample_set, idx, rng=None, pos_noise=0.0):
    ei, t = sample_set.index[idx]
    ep = sample_set.episodes[ei]
    feats = frame_features(
        ep.symbolic[t], ep.states[t], ep.wrench_left[t], ep.wrench_right[t],
        ep.instruction, ep.operating_arm,
    )
    if rng is not None and pos_noise > 0.0:
        # Jitter the geometric inputs so rollouts that drift a little stay
        # on-distribution (the targets are untouched).
        from .features import COLORS, SHAPES

        base = len(COLORS) + len(SHAPES)
        live_obj = ~feats["objects_mask"]
        feats["objects"][live_obj, base : base + 3] += rng.normal(
            0.0, pos_noise, size=(int(live_obj.sum()), 3)
        )
        live_sock = ~feats["sockets_mask"]
        feats["sockets"][live_sock, :3] += rng.normal(
            0.0, pos_noise, size=(int(live_sock.sum()), 3)
        )
        for sl in (slice(0, 3), slice(7, 10)):
            feats["state"][sl] += rng.normal(0.0, pos_noise * 0.7, size=3)
    acts, force, mask = chunk_targets(ep, t)
    feats["action_target"] = acts
    feats["force_target"] = force
    feats["pad_mask"] = mask
    return feats


def train(
    data_root,
    task_id=None,
    *,
    steps: int = 2500,
    batch_size: int = 64,
    lr: float = 1e-3,
    lr_decay_at: float = 0.7,
    seed: int = 0,
    force_branch: bool = True,
    force_loss_weight: float = 0.1,
    pos_noise: float = 0.006,
    log_every: int = 200,
    checkpoint=None,
    d_model: int = 128,
    depth: int = 3,
):
    episode_dirs = discover_episodes(data_root, task_id)
    if not episode_dirs:
        raise FileNotFoundError(f"no episodes under {data_root}")
    sample_set = build_sample_set(episode_dirs)
    config = PolicyConfig(
        d_model=d_model,
        depth=depth,
        force_branch=force_branch,
        force_loss_weight=force_loss_weight,
        seed=seed,
        force_mean=[float(x) for x in sample_set.force_mean],
        force_std=[float(x) for x in sample_set.force_std],
    )
    torch.manual_seed(seed)
    model = build_policy(config)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    rng = np.random.default_rng(seed)
    history = []
    t0 = time.time()
    decay_step = int(steps * lr_decay_at)
    for step in range(1, steps + 1):
        if step == decay_step:
            for group in optimizer.param_groups:
                group["lr"] = lr * 0.3
        picks = rng.integers(0, len(sample_set), size=batch_size)
        batch = batch_to_tensors(
            [sample_features(sample_set, int(i), rng, pos_noise) for i in picks]
        )
        stats = train_step(model, batch, optimizer)
        history.append(stats["total"])
        if log_every and step % log_every == 0:
            recent = float(np.mean(history[-log_every:]))
            print(
                f"step {step:5d} loss {recent:.5f} "
                f"(action {stats['action_loss']:.5f} force {stats['force_loss']:.5f}) "
                f"{time.time() - t0:.0f}s",
                flush=True,
            )
    if checkpoint:
        save_checkpoint(model, checkpoint, {"episodes": len(episode_dirs), "steps": steps})
    return model, history


def save_checkpoint(model, path, extra=None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "checkpoint_version": CHECKPOINT_VERSION,
            "config": asdict(model.config),
            "state_dict": model.state_dict(),
            "extra": extra or {},
        },
        path,
    )


def load_checkpoint(path):
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version in {path}")
    config = PolicyConfig(**blob["config"])
    model = build_policy(config)
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bappolicy-train")
    parser.add_argument("--data", required=True, help="dataset root")
    parser.add_argument("--task", default=None, help="restrict to one task")
    parser.add_argument("--steps", type=int, default=2500)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--no-force-branch", action="store_true")
    parser.add_argument("--force-loss-weight", type=float, default=0.1)
    parser.add_argument("--out", required=True, help="checkpoint path")
    args = parser.parse_args(argv)
    model, history = train(
        args.data,
        args.task,
        steps=args.steps,
        batch_size=args.batch_size,
        lr=args.lr,
        seed=args.seed,
        force_branch=not args.no_force_branch,
        force_loss_weight=args.force_loss_weight,
        checkpoint=args.out,
    )
    print(json.dumps({"final_loss": history[-1], "params": model.parameter_count()}))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
