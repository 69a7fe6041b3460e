"""Evaluation metrics: success rates and vertical-force statistics."""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal

import numpy as np

FZ_CONVENTIONS = ("max", "min")


def success_rate_percent(successes: int, trials: int) -> float:
    """100 * successes / trials, one decimal, ties away from zero."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    v = Decimal(100) * Decimal(successes) / Decimal(trials)
    return float(v.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _fz_trace(episode) -> np.ndarray:
    wrench = episode.wrench_left if episode.operating_arm == "left" else episode.wrench_right
    return np.asarray(wrench, dtype=np.float64)[:, 2]


def episode_fz_extremum(episode, convention: str = "max") -> float:
    trace = _fz_trace(episode)
    if trace.size == 0:
        raise ValueError("episode has no frames")
    if convention == "max":
        return float(trace.max())
    if convention == "min":
        return float(trace.min())
    raise ValueError(f"unknown fz convention {convention!r} (use max or min)")


def avg_fz_max(episodes, convention: str = "max") -> float:
    """Mean over episodes of the per-episode signed extremum of the
    operating arm's vertical force.

    Both sign conventions are supported: 'max' takes the signed maximum
    of each trace, 'min' the signed minimum.
    """
    episodes = list(episodes)
    if not episodes:
        raise ValueError("avg_fz_max needs at least one episode")
    return float(np.mean([episode_fz_extremum(ep, convention) for ep in episodes]))


def fz_range_mean(episodes) -> float:
    """Mean over episodes of (max - min) of the operating vertical force."""
    episodes = list(episodes)
    if not episodes:
        raise ValueError("fz_range_mean needs at least one episode")
    spans = []
    for ep in episodes:
        trace = _fz_trace(ep)
        spans.append(float(trace.max() - trace.min()))
    return float(np.mean(spans))


def fz_reduction(baseline: float, variant: float, mean_fz_range: float) -> float:
    """Percent change of the peak vertical force, normalized by the mean
    per-episode force range.

    Magnitude is 100 * |baseline - variant| / mean_fz_range; the sign is
    negative when the variant's peak moved toward lower contact magnitude
    (|variant| < |baseline|).
    """
    if mean_fz_range <= 0:
        raise ValueError("mean_fz_range must be positive")
    value = 100.0 * abs(baseline - variant) / mean_fz_range
    if abs(variant) < abs(baseline):
        return -value
    return value
