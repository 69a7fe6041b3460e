from .ensemble import ActionChunk, CHUNK_HORIZON, EnsembleBuffer, ProtocolError, temporal_ensemble
from .expert_policy import ExpertPolicy
from .metrics import avg_fz_max, fz_range_mean, fz_reduction, success_rate_percent
from .protocol import open_endpoint, serve_stdio
from .runner import EvalReport, TaskEval, TrialLog, replay_episode, run_trial, run_trials, trial_seeds

__all__ = [
    "ActionChunk",
    "CHUNK_HORIZON",
    "EnsembleBuffer",
    "EvalReport",
    "ExpertPolicy",
    "ProtocolError",
    "TaskEval",
    "TrialLog",
    "avg_fz_max",
    "fz_range_mean",
    "fz_reduction",
    "open_endpoint",
    "replay_episode",
    "run_trial",
    "run_trials",
    "serve_stdio",
    "success_rate_percent",
    "temporal_ensemble",
    "trial_seeds",
]
