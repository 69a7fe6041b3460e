"""Chunking behavior-cloning policy with an optional force branch.

Token sequence: [object tokens, socket tokens, state, instruction,
action slots] plus, when the force branch is on, a force token (linear
encoding of the operating arm's current wrench) and a query token whose
final representation emits the future-wrench chunk.

Attention is masked so the base tokens never attend to the force or
query tokens: with the branch disabled the action outputs are
bit-identical given identical shared parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .data import ACTION_DIM, FORCE_DIM, HORIZON
from .features import MAX_OBJECTS, MAX_SOCKETS, OBJ_FEAT, SOCK_FEAT, INSTRUCTION_WORDS


@dataclass
class PolicyConfig:
    obs_mode: str = "symbolic"
    d_model: int = 96
    depth: int = 2
    heads: int = 4
    ff_mult: int = 2
    horizon: int = HORIZON
    action_dim: int = ACTION_DIM
    force_dim: int = FORCE_DIM
    force_branch: bool = True
    force_loss_weight: float = 0.1
    seed: int = 0
    force_mean: list = field(default_factory=lambda: [0.0] * FORCE_DIM)
    force_std: list = field(default_factory=lambda: [1.0] * FORCE_DIM)

    def __post_init__(self):
        if self.horizon != HORIZON or self.action_dim != ACTION_DIM:
            raise ValueError("horizon and action dim are fixed by the harness contract")
        if self.obs_mode != "symbolic":
            raise ValueError("only symbolic observations are supported")


class ChunkingPolicy(nn.Module):
    def __init__(self, config: PolicyConfig):
        super().__init__()
        self.config = config
        d = config.d_model
        torch.manual_seed(config.seed)
        # Shared modules first: a branch-off build under the same seed gets
        # identical shared parameters.
        self.obj_proj = nn.Linear(OBJ_FEAT, d)
        self.sock_proj = nn.Linear(SOCK_FEAT, d)
        self.state_proj = nn.Linear(ACTION_DIM, d)
        self.instr_proj = nn.Linear(len(INSTRUCTION_WORDS), d)
        self.action_slots = nn.Parameter(torch.randn(config.horizon, d) * 0.02)
        layer = nn.TransformerEncoderLayer(
            d_model=d,
            nhead=config.heads,
            dim_feedforward=config.ff_mult * d,
            dropout=0.0,
            batch_first=True,
            norm_first=True,
        )
        self.encoder = nn.TransformerEncoder(
            layer, num_layers=config.depth, enable_nested_tensor=False
        )
        self.action_head = nn.Linear(d, config.action_dim)
        if config.force_branch:
            self.force_proj = nn.Linear(config.force_dim, d)
            self.query_slot = nn.Parameter(torch.randn(1, d) * 0.02)
            self.force_head = nn.Sequential(
                nn.Linear(d, d), nn.GELU(), nn.Linear(d, config.horizon * config.force_dim)
            )
        self.register_buffer(
            "force_mean", torch.tensor(config.force_mean, dtype=torch.get_default_dtype())
        )
        self.register_buffer(
            "force_std", torch.tensor(config.force_std, dtype=torch.get_default_dtype())
        )

    @property
    def n_base(self) -> int:
        return MAX_OBJECTS + MAX_SOCKETS + 2 + self.config.horizon

    def _build_mask(self, obj_mask, sock_mask, with_force):
        """(B, N, N) float mask: -inf where key j is forbidden for query i."""
        b = obj_mask.shape[0]
        n = self.n_base + (2 if with_force else 0)
        pad = torch.zeros(b, n, dtype=torch.bool, device=obj_mask.device)
        pad[:, :MAX_OBJECTS] = obj_mask
        pad[:, MAX_OBJECTS : MAX_OBJECTS + MAX_SOCKETS] = sock_mask
        blocked = pad[:, None, :].expand(b, n, n).clone()
        if with_force:
            # Base tokens never read the force or query tokens.
            blocked[:, : self.n_base, self.n_base :] = True
        eye = torch.eye(n, dtype=torch.bool, device=obj_mask.device)
        blocked = blocked & ~eye[None, :, :]  # always allow self-attention
        mask = torch.zeros(b, n, n, dtype=torch.get_default_dtype(), device=obj_mask.device)
        mask = mask.masked_fill(blocked, float("-inf"))
        return mask

    def forward(self, batch: dict):
        """batch tensors: objects (B, 20, 25), objects_mask (B, 20) bool,
        sockets (B, 6, 6), sockets_mask (B, 6) bool, state (B, 16),
        instruction (B, 9), wrench (B, 6).

        Returns {"action_chunk": (B, 8, 16)} plus, with the force branch,
        {"force_chunk": (B, 8, 6)} in normalized units."""
        cfg = self.config
        b = batch["state"].shape[0]
        tokens = [
            self.obj_proj(batch["objects"]),
            self.sock_proj(batch["sockets"]),
            self.state_proj(batch["state"]).unsqueeze(1),
            self.instr_proj(batch["instruction"]).unsqueeze(1),
            self.action_slots.unsqueeze(0).expand(b, -1, -1),
        ]
        if cfg.force_branch:
            wrench = (batch["wrench"] - self.force_mean) / self.force_std
            tokens.append(self.force_proj(wrench).unsqueeze(1))
            tokens.append(self.query_slot.unsqueeze(0).expand(b, -1, -1))
        x = torch.cat(tokens, dim=1)
        mask = self._build_mask(batch["objects_mask"], batch["sockets_mask"], cfg.force_branch)
        heads = cfg.heads
        attn = mask.repeat_interleave(heads, dim=0)
        y = self.encoder(x, mask=attn)
        a0 = MAX_OBJECTS + MAX_SOCKETS + 2
        actions = self.action_head(y[:, a0 : a0 + cfg.horizon])
        out = {"action_chunk": actions}
        if cfg.force_branch:
            q = y[:, -1]
            out["force_chunk"] = self.force_head(q).view(b, cfg.horizon, cfg.force_dim)
        return out

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def build_policy(config: PolicyConfig) -> ChunkingPolicy:
    """Construct a policy; identical config and seed give identical
    initial parameters."""
    model = ChunkingPolicy(config)
    if model.parameter_count() > 2_000_000:
        raise ValueError(f"policy too large ({model.parameter_count()} params)")
    return model


def batch_to_tensors(samples: list, device="cpu", dtype=None) -> dict:
    dtype = dtype or torch.get_default_dtype()
    keys = ("objects", "sockets", "state", "instruction", "wrench")
    out = {
        k: torch.as_tensor(np.stack([s[k] for s in samples]), dtype=dtype, device=device)
        for k in keys
    }
    for k in ("objects_mask", "sockets_mask"):
        out[k] = torch.as_tensor(
            np.stack([s[k] for s in samples]), dtype=torch.bool, device=device
        )
    for k in ("action_target", "force_target", "pad_mask"):
        if k in samples[0]:
            t = torch.bool if k == "pad_mask" else dtype
            out[k] = torch.as_tensor(np.stack([s[k] for s in samples]), dtype=t, device=device)
    return out


def losses(model: ChunkingPolicy, batch: dict):
    """(action_loss, force_loss) with pad-masked mean squared errors;
    force targets are compared in normalized units."""
    out = model(batch)
    keep = (~batch["pad_mask"]).to(out["action_chunk"].dtype)[:, :, None]
    diff = (out["action_chunk"] - batch["action_target"]) ** 2 * keep
    action_loss = diff.sum() / (keep.sum() * model.config.action_dim)
    force_loss = torch.zeros((), dtype=action_loss.dtype)
    if model.config.force_branch:
        target = (batch["force_target"] - model.force_mean) / model.force_std
        fdiff = (out["force_chunk"] - target) ** 2 * keep
        force_loss = fdiff.sum() / (keep.sum() * model.config.force_dim)
    return action_loss, force_loss


def train_step(model: ChunkingPolicy, batch: dict, optimizer, force_loss_weight=None):
    """One optimizer update; returns the loss dict. total = action +
    weight * force."""
    lam = (
        model.config.force_loss_weight if force_loss_weight is None else force_loss_weight
    )
    optimizer.zero_grad(set_to_none=True)
    action_loss, force_loss = losses(model, batch)
    total = action_loss + lam * force_loss
    if not torch.isfinite(total):
        raise RuntimeError(
            f"non-finite loss: action={float(action_loss)} force={float(force_loss)}"
        )
    total.backward()
    optimizer.step()
    return {
        "action_loss": float(action_loss),
        "force_loss": float(force_loss),
        "total": float(total),
    }
