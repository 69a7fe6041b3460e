"""Low-fidelity flat-shaded rendering.

One primary ray per pixel, first hit wins, pixel takes the body's color
tag. This closes the loop with the visibility queries: both run on the
same intersection code, so a body with zero visible fraction contributes
zero pixels.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from ..geometry import Pose
from ..sim.scene import KNOWN_COLORS, SceneState
from .camera import CameraSpec, camera_world_pose

BACKGROUND = (40, 44, 52)


def render(spec: CameraSpec, camera_pose: Pose, state: SceneState) -> np.ndarray:
    """RGB uint8 image (H, W, 3)."""
    from .camera import pixel_rays

    dirs = pixel_rays(spec, camera_pose)
    n = dirs.shape[0]
    parts = state.world_parts(exclude=frozenset(), colliders_only=False)
    img = np.empty((n, 3), dtype=np.uint8)
    img[:] = BACKGROUND
    if parts.n:
        origins = np.broadcast_to(camera_pose.position, (n, 3))
        t = parts.raycast_matrix(origins, dirs)
        best = np.argmin(t, axis=1)
        hit = np.isfinite(t[np.arange(n), best])
        owners = parts.owners[best[hit]]
        palette = np.array(
            [KNOWN_COLORS[b.color] for b in state.bodies], dtype=np.uint8
        )
        img[hit] = palette[owners]
    return img.reshape(spec.height, spec.width, 3)


def render_camera(spec: CameraSpec, state: SceneState) -> np.ndarray:
    return render(spec, camera_world_pose(spec, state.robot), state)


def encode_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image, mode="RGB").save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(data)).convert("RGB"))
