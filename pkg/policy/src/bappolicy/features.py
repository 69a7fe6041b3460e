"""Symbolic observations to fixed-size token features.

Each visible object entry becomes one token feature vector (color and
shape one-hots, pose relative to its camera, visible fraction, camera
tag); socket entries get their own slot type. The instruction is reduced
to a bag of known slot words.
"""

from __future__ import annotations

import numpy as np

COLORS = (
    "red", "green", "blue", "yellow", "orange", "purple",
    "white", "black", "gray", "silver", "wood", "brown",
)
SHAPES = ("box", "cylinder")
CAMERAS = ("head", "left_wrist", "right_wrist")
INSTRUCTION_WORDS = (
    "red", "green", "blue", "yellow",
    "left", "middle", "right", "upper", "lower",
)

OBJ_FEAT = len(COLORS) + len(SHAPES) + 3 + 4 + 1 + len(CAMERAS)  # 25
SOCK_FEAT = 3 + len(CAMERAS)  # 6
MAX_OBJECTS = 20
MAX_SOCKETS = 6


def object_features(symbolic: dict) -> tuple:
    """(object feats (MAX_OBJECTS, OBJ_FEAT), obj mask, socket feats, socket mask).

    Masks are True for padding slots.
    """
    obj = np.zeros((MAX_OBJECTS, OBJ_FEAT))
    obj_mask = np.ones(MAX_OBJECTS, dtype=bool)
    sock = np.zeros((MAX_SOCKETS, SOCK_FEAT))
    sock_mask = np.ones(MAX_SOCKETS, dtype=bool)
    oi = si = 0
    for cam in CAMERAS:
        rec = symbolic.get(cam)
        if rec is None:
            continue
        cam_hot = np.zeros(len(CAMERAS))
        cam_hot[CAMERAS.index(cam)] = 1.0
        for entry in rec.get("objects", []):
            if oi >= MAX_OBJECTS:
                break
            vec = np.zeros(OBJ_FEAT)
            if entry.get("color") in COLORS:
                vec[COLORS.index(entry["color"])] = 1.0
            base = len(COLORS)
            if entry.get("shape") in SHAPES:
                vec[base + SHAPES.index(entry["shape"])] = 1.0
            base += len(SHAPES)
            vec[base : base + 3] = entry.get("pos", (0, 0, 0))
            vec[base + 3 : base + 7] = entry.get("quat", (1, 0, 0, 0))
            vec[base + 7] = entry.get("frac", 0.0)
            vec[base + 8 :] = cam_hot
            obj[oi] = vec
            obj_mask[oi] = False
            oi += 1
        for entry in rec.get("sockets", []):
            if si >= MAX_SOCKETS:
                break
            vec = np.zeros(SOCK_FEAT)
            vec[:3] = entry.get("pos", (0, 0, 0))
            vec[3:] = cam_hot
            sock[si] = vec
            sock_mask[si] = False
            si += 1
    return obj, obj_mask, sock, sock_mask


def instruction_features(instruction: str) -> np.ndarray:
    words = instruction.lower().replace(",", " ").replace(".", " ").split()
    vec = np.zeros(len(INSTRUCTION_WORDS))
    for i, w in enumerate(INSTRUCTION_WORDS):
        if w in words:
            vec[i] = 1.0
    return vec


def frame_features(symbolic: dict, state, wrench_left, wrench_right, instruction,
                   operating_arm: str) -> dict:
    obj, obj_mask, sock, sock_mask = object_features(symbolic)
    wrench = wrench_left if operating_arm == "left" else wrench_right
    return {
        "objects": obj,
        "objects_mask": obj_mask,
        "sockets": sock,
        "sockets_mask": sock_mask,
        "state": np.asarray(state, dtype=np.float64),
        "instruction": instruction_features(instruction),
        "wrench": np.asarray(wrench, dtype=np.float64),
    }
