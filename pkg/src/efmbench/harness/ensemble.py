"""Action chunking with temporal ensembling.

A policy reply is a chunk of 8 future actions (16 numbers each). At
execution step t every live chunk contributes its prediction for t,
weighted exp(-m * age); quaternion components are renormalized after
averaging.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import canonicalize_quat

CHUNK_HORIZON = 8
ACTION_DIM = 16
QUAT_SLICES = (slice(3, 7), slice(11, 15))


class ProtocolError(RuntimeError):
    """Wire-protocol violation by a policy endpoint."""


@dataclass(frozen=True)
class ActionChunk:
    actions: np.ndarray  # (8, 16)
    issued_at: int

    def __post_init__(self):
        a = np.asarray(self.actions, dtype=np.float64)
        if a.shape != (CHUNK_HORIZON, ACTION_DIM):
            raise ProtocolError(
                f"action chunk must be {CHUNK_HORIZON}x{ACTION_DIM}, got {a.shape}"
            )
        if not np.all(np.isfinite(a)):
            raise ProtocolError("action chunk contains non-finite values")
        object.__setattr__(self, "actions", a)

    def covers(self, t: int) -> bool:
        return self.issued_at <= t < self.issued_at + CHUNK_HORIZON

    def at(self, t: int) -> np.ndarray:
        return self.actions[t - self.issued_at]


@dataclass
class EnsembleBuffer:
    m: float = 0.01  # exponential age decay
    chunks: list = field(default_factory=list)

    def push(self, chunk: ActionChunk) -> None:
        self.chunks.append(chunk)

    def evict(self, t: int) -> None:
        self.chunks = [c for c in self.chunks if c.issued_at + CHUNK_HORIZON > t]

    def contributors(self, t: int) -> list:
        return [c for c in self.chunks if c.covers(t)]


def temporal_ensemble(buffer: EnsembleBuffer, t: int) -> np.ndarray:
    """Decay-weighted average of all live predictions for step t.

    Weights are exp(-m * age) with age = t - issued_at; the two per-arm
    quaternion blocks are renormalized (w >= 0) after averaging.
    """
    buffer.evict(t)
    parts = buffer.contributors(t)
    if not parts:
        raise ProtocolError(f"no action predictions cover step {t}")
    ages = np.array([t - c.issued_at for c in parts], dtype=np.float64)
    w = np.exp(-buffer.m * ages)
    stacked = np.stack([c.at(t) for c in parts])
    action = (w[:, None] * stacked).sum(axis=0) / w.sum()
    for sl in QUAT_SLICES:
        q = action[sl]
        n = np.linalg.norm(q)
        if n < 1e-9:
            action[sl] = np.array([1.0, 0.0, 0.0, 0.0])
        else:
            action[sl] = canonicalize_quat(q / n)
    return action
