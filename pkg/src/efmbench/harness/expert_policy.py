"""The scripted expert wrapped as a policy endpoint.

On reset it regenerates the seeded demonstration for the announced task
and then serves chunks sliced from that action schedule. All live chunks
agree on every step, so temporal ensembling reproduces the schedule
exactly and the evaluation rolls out the demonstration verbatim.
"""

from __future__ import annotations

import numpy as np

from ..expert.demo import demonstrate
from ..tasks.instance import instantiate_task
from .ensemble import CHUNK_HORIZON
from .protocol import PROTOCOL_VERSION


class ExpertPolicy:
    def __init__(self):
        self._actions = None
        self._wrenches = None

    def reset(self, msg: dict) -> None:
        inst = instantiate_task(msg["task"], int(msg["seed"]))
        episode = demonstrate(
            inst, msg.get("view_mode", "area_ee"), int(msg["seed"]),
            obs_mode=msg.get("obs_mode", "symbolic"),
        )
        self._actions = episode.actions.astype(np.float64)
        op = episode.operating_arm
        wr = episode.wrench_left if op == "left" else episode.wrench_right
        self._wrenches = wr.astype(np.float64)

    def act(self, msg: dict) -> dict:
        if self._actions is None:
            return {
                "protocol_version": PROTOCOL_VERSION,
                "type": "error",
                "message": "no reset received",
            }
        t = int(msg["t"])
        chunk = np.empty((CHUNK_HORIZON, self._actions.shape[1]))
        force = np.empty((CHUNK_HORIZON, 6))
        last = len(self._actions) - 1
        for k in range(CHUNK_HORIZON):
            idx = min(t + k, last)
            chunk[k] = self._actions[idx]
            # Future wrench of the step after the action applies.
            force[k] = self._wrenches[min(idx + 1, last)]
        return {
            "protocol_version": PROTOCOL_VERSION,
            "type": "action",
            "chunk": chunk.tolist(),
            "force_pred": force.tolist(),
        }


def main() -> None:
    from .protocol import serve_stdio

    serve_stdio(ExpertPolicy())


if __name__ == "__main__":
    main()
