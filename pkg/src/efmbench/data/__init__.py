from .episode import FPS, FRAME_WIDTH, Episode, EpisodeError, validate_episode
from .io import episode_dirname, iter_episode_dirs, pack, read_episode, write_episode
from .stats import DatasetStats, TaskStats, compute_stats, format_stats_table, merge_stats

__all__ = [
    "FPS",
    "FRAME_WIDTH",
    "DatasetStats",
    "Episode",
    "EpisodeError",
    "TaskStats",
    "compute_stats",
    "episode_dirname",
    "format_stats_table",
    "iter_episode_dirs",
    "merge_stats",
    "pack",
    "read_episode",
    "validate_episode",
    "write_episode",
]
