from .data import build_sample_set, discover_episodes, load_episode
from .model import ChunkingPolicy, PolicyConfig, build_policy, losses, train_step
from .train import load_checkpoint, save_checkpoint, train

__all__ = [
    "ChunkingPolicy",
    "PolicyConfig",
    "build_policy",
    "build_sample_set",
    "discover_episodes",
    "load_checkpoint",
    "load_episode",
    "losses",
    "save_checkpoint",
    "train",
    "train_step",
]
