"""Scene construction for the ten benchmark tasks.

Each builder turns (variation, seeded rng) into a scene description plus
an info dict naming the bodies the expert and the success judge care
about. Compartments open toward -x: the fixed head camera only gets a
grazing angle into them, so their contents stay hidden until a wrist
camera comes around to face the opening.
"""

from __future__ import annotations

import numpy as np

from ..geometry import Pose
from ..sim import scene as scene_mod

COLORS = ("red", "green", "blue", "yellow")

TABLE = {
    "id": "table",
    "shape": {"type": "box", "half_extents": [0.45, 0.30, 0.02]},
    "pose": {"position": [0, 0, -0.02]},
    "color": "wood",
    "static": True,
}

# Cabinet interior (side-opening boxes stacked at x = 0.27, y = 0.16).
CAB_X, CAB_Y = 0.27, 0.16
CAB_IX, CAB_IY, CAB_IZ, CAB_WALL = 0.07, 0.075, 0.05, 0.012
COMPARTMENTS = {
    "lower": {"center_z": CAB_WALL + CAB_IZ, "floor_z": CAB_WALL},
    "upper": {"center_z": 3 * CAB_WALL + 3 * CAB_IZ, "floor_z": 3 * CAB_WALL + 2 * CAB_IZ},
}

TOY_HALF = 0.015
TABLE_SPOTS = ((-0.27, -0.12), (-0.18, -0.12), (-0.09, -0.12), (0.0, -0.12))
CUP_SLOTS = ((-0.30, -0.10), (-0.22, -0.10), (-0.14, -0.10))
COASTERS = ((0.18, 0.10), (0.28, 0.02))
BOX_STARTS = ((-0.18, -0.14), (-0.06, -0.14), (0.06, -0.14), (0.18, -0.14))
LINED_AREA = (0.0, 0.10)
CHARGER_SPOTS = ((0.12, 0.10), (0.22, 0.06), (0.05, 0.16))
DOUGH_SPOTS = ((-0.24, -0.10), (-0.12, -0.14), (0.0, -0.16), (-0.18, 0.02), (-0.06, -0.04))
TRAY_SPOTS = ((0.16, 0.10), (0.04, 0.14))
OILCUP_SPOTS = ((0.32, -0.05), (0.33, 0.10))
STRIP_SPOTS = ((0.0, 0.14), (0.16, 0.10), (-0.16, 0.10), (0.0, 0.06))
PORT_BLOCK = (0.20, 0.14)
NAIL_BLOCK = (0.16, 0.12)


def open_compartment(bid, pos, inner=(CAB_IX, CAB_IY, CAB_IZ), wall=CAB_WALL, color="wood"):
    """Box open on its local -x face: back, floor, top, two y-side walls."""
    ix, iy, iz = inner
    parts = [
        {"position": [ix + wall / 2, 0, 0], "shape": {"type": "box", "half_extents": [wall / 2, iy + wall, iz + wall]}},
        {"position": [0, 0, -iz - wall / 2], "shape": {"type": "box", "half_extents": [ix, iy + wall, wall / 2]}},
        {"position": [0, 0, iz + wall / 2], "shape": {"type": "box", "half_extents": [ix, iy + wall, wall / 2]}},
        {"position": [0, -iy - wall / 2, 0], "shape": {"type": "box", "half_extents": [ix, wall / 2, iz]}},
        {"position": [0, iy + wall / 2, 0], "shape": {"type": "box", "half_extents": [ix, wall / 2, iz]}},
    ]
    return {
        "id": bid,
        "shape": {"type": "composite", "parts": parts},
        "pose": {"position": list(pos)},
        "color": color,
        "static": True,
    }


def cabinet_bodies():
    return [
        open_compartment("cabinet_lower", (CAB_X, CAB_Y, COMPARTMENTS["lower"]["center_z"])),
        open_compartment("cabinet_upper", (CAB_X, CAB_Y, COMPARTMENTS["upper"]["center_z"])),
    ]


def compartment_slot(compartment: str, lateral: float = 0.0):
    """World position on the compartment floor, lateral offset along y."""
    c = COMPARTMENTS[compartment]
    return np.array([CAB_X - 0.005, CAB_Y + lateral, c["floor_z"]])


def compartment_mouth(compartment: str):
    c = COMPARTMENTS[compartment]
    return np.array([CAB_X - CAB_IX, CAB_Y, c["center_z"]])


def toy(bid, pos, color):
    return {
        "id": bid,
        "shape": {"type": "box", "half_extents": [TOY_HALF] * 3},
        "pose": {"position": [float(pos[0]), float(pos[1]), float(pos[2])]},
        "color": color,
        "grasp": {
            "anchor": [0, 0, TOY_HALF],
            "radius": 0.035,
            "hold_offset": {"position": [0, 0, TOY_HALF], "quat": [0, 1, 0, 0]},
        },
    }


def plate(bid, pos, color):
    return {
        "id": bid,
        "shape": {"type": "cylinder", "radius": 0.03, "half_height": 0.004},
        "pose": {"position": [float(pos[0]), float(pos[1]), float(pos[2])]},
        "color": color,
    }


def cup(bid, pos, color):
    return {
        "id": bid,
        "shape": {
            "type": "composite",
            "parts": [
                {"shape": {"type": "cylinder", "radius": 0.032, "half_height": 0.042}},
                {"position": [0.043, 0, 0.005], "shape": {"type": "box", "half_extents": [0.006, 0.015, 0.02]}},
            ],
        },
        "pose": {"position": [float(pos[0]), float(pos[1]), 0.042]},
        "color": color,
        "grasp": {"anchor": [0, 0, 0.042], "radius": 0.05, "hold_offset": {"position": [0, 0, 0.042], "quat": [0, 1, 0, 0]}},
        "hang_point": [0.049, 0, 0.01],
    }


def rack(bid, pos):
    return {
        "id": bid,
        "shape": {
            "type": "composite",
            "parts": [
                {"position": [0, 0, 0.01], "shape": {"type": "box", "half_extents": [0.035, 0.035, 0.01]}},
                {"position": [0, 0, 0.11], "shape": {"type": "box", "half_extents": [0.009, 0.009, 0.09]}},
                {
                    "position": [-0.037, 0, 0.17],
                    "quat": [0.7071067811865476, 0, 0.7071067811865476, 0],
                    "shape": {"type": "cylinder", "radius": 0.006, "half_height": 0.028},
                },
            ],
        },
        "pose": {"position": [float(pos[0]), float(pos[1]), 0.0]},
        "color": "gray",
        "static": True,
        "hook_point": [-0.058, 0, 0.17],
    }


def _jitter(rng, scale=0.008):
    return rng.uniform(-scale, scale, size=2)


def _mk(desc_bodies, hidden=None):
    d = {"schema_version": 1, "bodies": [TABLE] + desc_bodies}
    if hidden:
        d["hidden"] = hidden
    return d


def build_toy_find(variation, rng):
    color, compartment = variation["color"], variation["compartment"]
    bodies = cabinet_bodies()
    lat = float(rng.choice((-0.045, 0.0, 0.045)))
    tpos = compartment_slot(compartment, lat) + [0, 0, TOY_HALF]
    bodies.append(toy("toy_target", tpos, color))
    hidden = [{"body": "toy_target", "attr": "color"}]
    others = [c for c in COLORS if c != color]
    rng.shuffle(others)
    n_extra = int(rng.integers(0, 3))
    used = {(compartment, round(lat, 3))}
    for k in range(n_extra):
        for _ in range(8):
            comp = str(rng.choice(("upper", "lower")))
            l2 = float(rng.choice((-0.045, 0.0, 0.045)))
            if (comp, round(l2, 3)) not in used:
                used.add((comp, round(l2, 3)))
                dpos = compartment_slot(comp, l2) + [0, 0, TOY_HALF]
                bodies.append(toy(f"toy_d{k}", dpos, others[k % len(others)]))
                hidden.append({"body": f"toy_d{k}", "attr": "color"})
                break
    drop = np.array([rng.uniform(-0.22, -0.02), rng.uniform(-0.18, -0.06)])
    info = {
        "target_body": "toy_target",
        "compartment": compartment,
        "required_color": color,
        "drop_point": [float(drop[0]), float(drop[1])],
        "compartments_to_check": ["upper", "lower"],
    }
    slots = {"The-Required-Color": color}
    return _mk(bodies, hidden), info, slots


def build_toy_match(variation, rng):
    color, compartment = variation["color"], variation["compartment"]
    bodies = cabinet_bodies()
    ppos = compartment_slot(compartment) + [0, 0, 0.004]
    bodies.append(plate("plate", ppos, color))
    hidden = [{"body": "plate", "attr": "color"}]
    spots = list(TABLE_SPOTS)
    rng.shuffle(spots)
    tpos = np.array(spots[0]) + _jitter(rng)
    bodies.append(toy("toy_target", [tpos[0], tpos[1], TOY_HALF], color))
    others = [c for c in COLORS if c != color]
    rng.shuffle(others)
    n_extra = 1 + int(rng.integers(0, 2))
    for k in range(n_extra):
        dpos = np.array(spots[1 + k]) + _jitter(rng)
        bodies.append(toy(f"toy_d{k}", [dpos[0], dpos[1], TOY_HALF], others[k]))
    info = {
        "target_body": "toy_target",
        "plate_body": "plate",
        "compartment": compartment,
        "required_color": color,
        "candidates": ["toy_target"] + [f"toy_d{k}" for k in range(n_extra)],
    }
    slots = {"The-Specified-Compartment": f"the {compartment} compartment"}
    return _mk(bodies, hidden), info, slots


def build_cup_hang(variation, rng):
    color, slot = variation["color"], variation["slot"]
    bodies = [rack("rack", (0.30, 0.18))]
    bodies.append(cup("cup_target", CUP_SLOTS[slot], color))
    cup_colors = [c for c in ("red", "green", "blue") if c != color]
    rng.shuffle(cup_colors)
    free = [k for k in range(3) if k != slot]
    n_extra = int(rng.integers(0, 3))
    for k in range(n_extra):
        if not free:
            break
        bodies.append(cup(f"cup_d{k}", CUP_SLOTS[free.pop(0)], cup_colors[k % len(cup_colors)]))
    info = {
        "target_body": "cup_target",
        "rack_body": "rack",
        "required_color": color,
        "hook_world": [0.30 - 0.058, 0.18, 0.17],
    }
    return _mk(bodies), info, {"The-Required-Color": color}


def build_cup_place(variation, rng):
    color, k = variation["color"], variation["coaster"]
    cx, cy = COASTERS[k]
    bodies = [
        {
            "id": "coaster",
            "shape": {"type": "cylinder", "radius": 0.032, "half_height": 0.002},
            "pose": {"position": [cx, cy, 0.002]},
            "color": "black",
            "static": True,
        }
    ]
    slot = int(rng.integers(0, 3))
    bodies.append(cup("cup_target", CUP_SLOTS[slot], color))
    cup_colors = [c for c in ("red", "green", "blue") if c != color]
    rng.shuffle(cup_colors)
    free = [j for j in range(3) if j != slot]
    for j in range(int(rng.integers(0, 3))):
        if not free:
            break
        bodies.append(cup(f"cup_d{j}", CUP_SLOTS[free.pop(0)], cup_colors[j % len(cup_colors)]))
    info = {
        "target_body": "cup_target",
        "coaster_body": "coaster",
        "required_color": color,
        "coaster_world": [cx, cy, 0.004],
    }
    return _mk(bodies), info, {"The-Required-Color": color}


def build_box_push(variation, rng):
    sx, sy = BOX_STARTS[variation["start"]]
    sx += float(rng.uniform(-0.01, 0.01))
    sy += float(rng.uniform(-0.01, 0.01))
    bodies = [
        {
            "id": "box",
            "shape": {"type": "box", "half_extents": [0.035, 0.035, 0.025]},
            "pose": {"position": [sx, sy, 0.025]},
            "color": "orange",
        },
        {
            "id": "lined_area",
            "shape": {"type": "box", "half_extents": [0.05, 0.05, 0.0008]},
            "pose": {"position": [LINED_AREA[0], LINED_AREA[1], 0.0008]},
            "color": "black",
            "static": True,
            "collider": False,
        },
    ]
    info = {"target_body": "box", "area_world": [LINED_AREA[0], LINED_AREA[1], 0.025]}
    return _mk(bodies), info, {}


def light_body(bid, pos, light_type):
    color = "black" if light_type == "usb_a" else "white"
    return {
        "id": bid,
        "shape": {"type": "box", "half_extents": [0.009, 0.018, 0.006]},
        "pose": {"position": [float(pos[0]), float(pos[1]), 0.006]},
        "color": color,
        "grasp": {"anchor": [0, 0, 0.006], "radius": 0.04, "hold_offset": {"position": [0, 0, 0.006], "quat": [0, 1, 0, 0]}},
        "plug": {"tip": [0, 0, -0.018], "radius": 0.0015},
    }


def build_light_plug(variation, rng):
    light_type, k = variation["light_type"], variation["charger"]
    cx, cy = CHARGER_SPOTS[k]
    clearance = 0.0022 if light_type == "usb_a" else 0.0018
    bodies = [
        {
            "id": "charger",
            "shape": {"type": "box", "half_extents": [0.025, 0.025, 0.0125]},
            "pose": {"position": [cx, cy, 0.0125]},
            "color": "white",
            "static": True,
            "sockets": [
                {
                    "name": "port",
                    "mouth": [0, 0, 0.0125],
                    "axis": [0, 0, -1],
                    "clearance": clearance,
                    "chamfer_radius": 0.0065,
                    "chamfer_depth": 0.008,
                    "depth": 0.010,
                    "full_depth": 0.012,
                }
            ],
        }
    ]
    lp = np.array([-0.10, -0.10]) + rng.uniform(-0.02, 0.02, size=2)
    bodies.append(light_body("light", lp, light_type))
    info = {
        "target_body": "light",
        "host_body": "charger",
        "socket": "port",
        "mouth_world": [cx, cy, 0.025],
    }
    return _mk(bodies), info, {}


def build_bread_brush(variation, rng):
    dx, dy = DOUGH_SPOTS[variation["dough"]]
    tx, ty = TRAY_SPOTS[variation["tray"]]
    ox, oy = OILCUP_SPOTS[variation["cup"]]
    bodies = [
        {
            "id": "tray",
            "shape": {"type": "box", "half_extents": [0.065, 0.055, 0.004]},
            "pose": {"position": [tx, ty, 0.004]},
            "color": "silver",
            "static": True,
        },
        {
            "id": "dough",
            "shape": {"type": "cylinder", "radius": 0.035, "half_height": 0.010},
            "pose": {"position": [dx, dy, 0.010]},
            "color": "yellow",
            "grasp": {"anchor": [0, 0, 0.010], "radius": 0.045, "hold_offset": {"position": [0, 0, 0.010], "quat": [0, 1, 0, 0]}},
            "paint_top": {"radius": 0.035, "cells": 4, "top_z": 0.010},
        },
        {
            "id": "oil_cup",
            "shape": {
                "type": "composite",
                "parts": [
                    {"position": [0, 0, 0.004], "shape": {"type": "box", "half_extents": [0.024, 0.024, 0.004]}},
                    {"position": [0.028, 0, 0.038], "shape": {"type": "box", "half_extents": [0.004, 0.024, 0.03]}},
                    {"position": [-0.028, 0, 0.038], "shape": {"type": "box", "half_extents": [0.004, 0.024, 0.03]}},
                    {"position": [0, 0.028, 0.038], "shape": {"type": "box", "half_extents": [0.032, 0.004, 0.03]}},
                    {"position": [0, -0.028, 0.038], "shape": {"type": "box", "half_extents": [0.032, 0.004, 0.03]}},
                ],
            },
            "pose": {"position": [ox, oy, 0.0]},
            "color": "gray",
            "static": True,
        },
        {
            "id": "brush",
            "shape": {
                "type": "composite",
                "parts": [
                    {"shape": {"type": "box", "half_extents": [0.008, 0.009, 0.035]}},
                    {"position": [0, 0, -0.045], "shape": {"type": "box", "half_extents": [0.010, 0.012, 0.010]}},
                ],
            },
            "pose": {"position": [ox, oy, 0.063]},
            "color": "brown",
            "grasp": {"anchor": [0, 0, 0.025], "radius": 0.04, "hold_offset": {"position": [0, 0, 0.025], "quat": [0, 1, 0, 0]}},
            "tool_tip": {"offset": [0, 0, -0.056], "radius": 0.008},
        },
    ]
    info = {
        "target_body": "dough",
        "tray_body": "tray",
        "brush_body": "brush",
        "oil_cup_body": "oil_cup",
        "tray_world": [tx, ty, 0.008],
    }
    return _mk(bodies), info, {}


def build_nail_knock(variation, rng):
    bx, by = NAIL_BLOCK
    bodies = [
        {
            "id": "block",
            "shape": {"type": "box", "half_extents": [0.05, 0.04, 0.025]},
            "pose": {"position": [bx, by, 0.025]},
            "color": "wood",
            "static": True,
            "sockets": [
                {
                    "name": "pilot",
                    "mouth": [0, 0, 0.025],
                    "axis": [0, 0, -1],
                    "clearance": 0.0035,
                    "chamfer_radius": 0.008,
                    "chamfer_depth": 0.006,
                    "depth": 0.026,
                    "full_depth": 0.02,
                }
            ],
        },
        {
            "id": "silver_paper",
            "shape": {"type": "box", "half_extents": [0.015, 0.015, 0.0004]},
            "pose": {"position": [bx, by, 0.0504]},
            "color": "silver",
            "static": True,
            "collider": False,
        },
        {
            "id": "nail",
            "shape": {
                "type": "composite",
                "parts": [
                    {"shape": {"type": "cylinder", "radius": 0.0028, "half_height": 0.019}},
                    {"position": [0, 0, 0.021], "shape": {"type": "cylinder", "radius": 0.007, "half_height": 0.002}},
                ],
            },
            "pose": {"position": [0.02 + float(rng.uniform(-0.01, 0.01)), -0.10, 0.019]},
            "color": "silver",
            "grasp": {"anchor": [0, 0, 0.015], "radius": 0.035, "hold_offset": {"position": [0, 0, 0.015], "quat": [0, 1, 0, 0]}},
            "plug": {"tip": [0, 0, -0.019], "radius": 0.0025},
        },
        {
            "id": "hammer",
            "shape": {
                "type": "composite",
                "parts": [
                    {"shape": {"type": "box", "half_extents": [0.008, 0.055, 0.008]}},
                    {"position": [0, 0.063, 0], "shape": {"type": "box", "half_extents": [0.024, 0.012, 0.014]}},
                ],
            },
            "pose": {"position": [0.0, -0.18, 0.014]},
            "color": "black",
            "grasp": {"anchor": [0, -0.035, 0], "radius": 0.04, "hold_offset": {"position": [0, -0.035, 0], "quat": [0, 1, 0, 0]}},
            "tool_tip": {"offset": [0, 0.063, -0.015], "radius": 0.009},
        },
    ]
    info = {
        "target_body": "nail",
        "hammer_body": "hammer",
        "host_body": "block",
        "socket": "pilot",
        "mouth_world": [bx, by, 0.05],
    }
    return _mk(bodies), info, {}


def cable_body(bid, pos, color):
    return {
        "id": bid,
        "shape": {"type": "box", "half_extents": [0.011, 0.017, 0.009]},
        "pose": {"position": [float(pos[0]), float(pos[1]), 0.009]},
        "color": color,
        "grasp": {"anchor": [0, 0, 0.009], "radius": 0.04, "hold_offset": {"position": [0, 0, 0.009], "quat": [0, 1, 0, 0]}},
        "plug": {"tip": [0, 0, -0.021], "radius": 0.0018},
    }


def build_cable_match(variation, rng):
    color, layout = variation["color"], variation["layout"]
    px, py = PORT_BLOCK
    a, w, h = 0.0155, 0.0035, 0.009
    bodies = [
        {
            "id": "port_block",
            "shape": {
                "type": "composite",
                "parts": [
                    {"position": [0, 0, 0.02], "shape": {"type": "box", "half_extents": [0.035, 0.03, 0.02]}},
                    {"position": [a + w, 0, 0.04 + h], "shape": {"type": "box", "half_extents": [w, a + 2 * w, h]}},
                    {"position": [-a - w, 0, 0.04 + h], "shape": {"type": "box", "half_extents": [w, a + 2 * w, h]}},
                    {"position": [0, a + w, 0.04 + h], "shape": {"type": "box", "half_extents": [a, w, h]}},
                    {"position": [0, -a - w, 0.04 + h], "shape": {"type": "box", "half_extents": [a, w, h]}},
                ],
            },
            "pose": {"position": [px, py, 0.0]},
            "color": "gray",
            "static": True,
            "sockets": [
                {
                    "name": "port",
                    "mouth": [0, 0, 0.04],
                    "axis": [0, 0, -1],
                    "clearance": 0.002,
                    "chamfer_radius": 0.006,
                    "chamfer_depth": 0.007,
                    "depth": 0.012,
                    "full_depth": 0.012,
                }
            ],
        },
        {
            "id": "port_marker",
            "shape": {"type": "cylinder", "radius": 0.0055, "half_height": 0.0006},
            "pose": {"position": [px, py, 0.0407]},
            "color": color,
            "static": True,
            "collider": False,
        },
    ]
    hidden = [{"body": "port_marker", "attr": "color"}]
    spots = list(TABLE_SPOTS)
    if layout == 1:
        spots = spots[::-1]
    tpos = np.array(spots[0]) + _jitter(rng)
    bodies.append(cable_body("cable_target", tpos, color))
    others = [c for c in COLORS if c != color]
    rng.shuffle(others)
    n_extra = 1 + int(rng.integers(0, 2))
    for k in range(n_extra):
        dpos = np.array(spots[1 + k]) + _jitter(rng)
        bodies.append(cable_body(f"cable_d{k}", dpos, others[k]))
    info = {
        "target_body": "cable_target",
        "host_body": "port_block",
        "socket": "port",
        "marker_body": "port_marker",
        "required_color": color,
        "mouth_world": [px, py, 0.04],
        "candidates": ["cable_target"] + [f"cable_d{k}" for k in range(n_extra)],
    }
    return _mk(bodies, hidden), info, {}


def build_charger_plug(variation, rng):
    port, k = variation["port"], variation["strip"]
    sx, sy = STRIP_SPOTS[k]
    offsets = {"left": -0.05, "middle": 0.0, "right": 0.05}
    sockets = []
    for name, off in offsets.items():
        sockets.append(
            {
                "name": name,
                "mouth": [off, 0, 0.011],
                "axis": [0, 0, -1],
                "clearance": 0.002,
                "chamfer_radius": 0.0065,
                "chamfer_depth": 0.007,
                "depth": 0.011,
                "full_depth": 0.012,
            }
        )
    bodies = [
        {
            "id": "strip",
            "shape": {"type": "box", "half_extents": [0.08, 0.025, 0.011]},
            "pose": {"position": [sx, sy, 0.011]},
            "color": "white",
            "static": True,
            "sockets": sockets,
        },
        {
            "id": "charger",
            "shape": {"type": "box", "half_extents": [0.0125, 0.0125, 0.015]},
            "pose": {
                "position": [
                    -0.12 + float(rng.uniform(-0.02, 0.02)),
                    -0.08 + float(rng.uniform(-0.02, 0.02)),
                    0.015,
                ]
            },
            "color": "black",
            "grasp": {"anchor": [0, 0, 0.015], "radius": 0.04, "hold_offset": {"position": [0, 0, 0.015], "quat": [0, 1, 0, 0]}},
            "plug": {"tip": [0, 0, -0.027], "radius": 0.002},
        },
    ]
    info = {
        "target_body": "charger",
        "host_body": "strip",
        "socket": port,
        "mouth_world": [sx + offsets[port], sy, 0.022],
        "port_name": port,
    }
    slots = {"Left/Middle/Right": port.capitalize()}
    return _mk(bodies), info, slots


BUILDERS = {
    "toy_find": build_toy_find,
    "toy_match": build_toy_match,
    "cup_hang": build_cup_hang,
    "cup_place": build_cup_place,
    "box_push": build_box_push,
    "light_plug": build_light_plug,
    "bread_brush": build_bread_brush,
    "nail_knock": build_nail_knock,
    "cable_match": build_cable_match,
    "charger_plug": build_charger_plug,
}
