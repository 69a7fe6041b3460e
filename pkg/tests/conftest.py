import numpy as np
import pytest

from efmbench.data import write_episode
from efmbench.expert import demonstrate
from efmbench.tasks import TASK_IDS, instantiate_task

GATE_EPISODES_PER_TASK = 20
MODES = ("area_ee", "area", "none")


@pytest.fixture(scope="session")
def gate_dataset(tmp_path_factory):
    """Shared on-disk dataset: 20 episodes per task per visibility mode.

    Feeds the mode-faithfulness, semantic-probe, and replay-fidelity
    acceptance checks.
    """
    root = tmp_path_factory.mktemp("gate_data")
    index = {}
    for mode in MODES:
        mode_root = root / mode
        locations = {}
        for tid in TASK_IDS:
            locations[tid] = []
            produced = 0
            seed = 0
            while produced < GATE_EPISODES_PER_TASK:
                ep = demonstrate(instantiate_task(tid, seed), mode, seed)
                if ep.success:
                    locations[tid].append(write_episode(ep, mode_root))
                    produced += 1
                seed += 1
        index[mode] = locations
    return index


def episode_gate_fractions(ep):
    """(area fraction over manipulation frames, ee fraction over
    manipulation frames, ee fraction over hand-held manipulation frames)."""
    manip = np.zeros(ep.frame_count, dtype=bool)
    hand = np.zeros(ep.frame_count, dtype=bool)
    for ph in ep.phases:
        if ph["manipulation"]:
            manip[ph["start"] : ph["end"] + 1] = True
        if ph["hand_held"]:
            hand[ph["start"] : ph["end"] + 1] = True
    area = ep.flags[:, 0] > 0.5
    ee = ep.flags[:, 1] > 0.5
    hh = manip & hand
    return (
        float(area[manip].mean()) if manip.any() else 1.0,
        float(ee[manip].mean()) if manip.any() else 1.0,
        float(ee[hh].mean()) if hh.any() else 0.0,
    )
