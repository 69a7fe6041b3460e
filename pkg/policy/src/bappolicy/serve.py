"""Policy server speaking the evaluation wire protocol on standard I/O.

Replies to every obs message with an action chunk; with the force branch
on the reply also carries the de-normalized future-wrench forecast.
Malformed messages get an error reply and the process stays alive.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import torch

from .features import frame_features
from .model import batch_to_tensors
from .train import load_checkpoint

PROTOCOL_VERSION = 1


class ServedPolicy:
    def __init__(self, model):
        self.model = model
        self.instruction = ""
        self.operating_arm = "right"
        self.obs_mode = "symbolic"

    def reset(self, msg: dict) -> None:
        self.instruction = msg.get("instruction", "")
        self.operating_arm = msg.get("operating_arm", "right")
        self.obs_mode = msg.get("obs_mode", "symbolic")

    def act(self, msg: dict) -> dict:
        if self.obs_mode != "symbolic" or "symbolic" not in msg:
            return {
                "protocol_version": PROTOCOL_VERSION,
                "type": "error",
                "message": f"policy consumes symbolic observations, got "
                f"{'pixels' if 'images' in msg else 'nothing'}",
            }
        feats = frame_features(
            msg["symbolic"],
            msg["state"],
            msg["wrench_left"],
            msg["wrench_right"],
            self.instruction,
            self.operating_arm,
        )
        batch = batch_to_tensors([feats])
        with torch.no_grad():
            out = self.model(batch)
        reply = {
            "protocol_version": PROTOCOL_VERSION,
            "type": "action",
            "chunk": out["action_chunk"][0].numpy().astype(float).tolist(),
        }
        if "force_chunk" in out:
            force = (
                out["force_chunk"][0] * self.model.force_std + self.model.force_mean
            )
            reply["force_pred"] = force.numpy().astype(float).tolist()
        return reply


def serve_stdio(policy: ServedPolicy, fin=None, fout=None) -> None:
    fin = fin if fin is not None else sys.stdin.buffer
    fout = fout if fout is not None else sys.stdout.buffer
    for line in fin:
        if not line.strip():
            continue
        try:
            msg = json.loads(line.decode())
            if msg.get("protocol_version") != PROTOCOL_VERSION:
                raise ValueError("missing or unsupported protocol_version")
            if msg.get("type") == "reset":
                policy.reset(msg)
                continue
            if msg.get("type") == "obs":
                reply = policy.act(msg)
            else:
                raise ValueError(f"unknown message type {msg.get('type')!r}")
        except Exception as e:  # stay alive on malformed input
            reply = {
                "protocol_version": PROTOCOL_VERSION,
                "type": "error",
                "message": str(e),
            }
        fout.write(json.dumps(reply, sort_keys=True, separators=(",", ":")).encode() + b"\n")
        fout.flush()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bappolicy-serve")
    parser.add_argument("--ckpt", required=True)
    args = parser.parse_args(argv)
    model = load_checkpoint(args.ckpt)
    serve_stdio(ServedPolicy(model))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
