"""Scene description schema, validation, and the immutable world snapshot.

A scene description is a plain dict (JSON-serializable, schema_version 1)
listing rigid bodies with shape primitives, colors, grasp regions, and
insertion geometries. ``reset`` validates it and materializes a
``SceneState`` whose RNG stream is derived only from the seed.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from ..geometry import Pose, canonicalize_quat
from . import shapes
from .shapes import BoxShape, CylinderShape, PartSet

SCHEMA_VERSION = 1
VISIBILITY_SAMPLES = 17

KNOWN_COLORS = {
    "red": (220, 50, 47),
    "green": (80, 170, 60),
    "blue": (50, 110, 220),
    "yellow": (235, 200, 40),
    "orange": (230, 120, 30),
    "purple": (140, 80, 180),
    "white": (235, 235, 235),
    "black": (35, 35, 35),
    "gray": (128, 128, 128),
    "silver": (190, 195, 200),
    "wood": (165, 125, 80),
    "brown": (120, 80, 50),
}


class SceneError(ValueError):
    """Malformed scene description or invalid scene operation."""


@dataclass(frozen=True)
class GraspSpec:
    anchor: np.ndarray  # local point the gripper must reach
    radius: float
    hold_offset: Pose  # held pose of the object in the EE frame


@dataclass(frozen=True)
class PlugSpec:
    tip: np.ndarray  # local tip point
    radius: float


@dataclass(frozen=True)
class SocketSpec:
    name: str
    mouth: np.ndarray  # local mouth-center point on the host surface
    axis: np.ndarray  # local unit vector pointing into the hole
    clearance: float  # lateral slack for the plug tip
    chamfer_radius: float  # countersink radius at the surface
    chamfer_depth: float  # countersink depth down to the hole proper
    depth: float  # hole depth below the countersink
    full_depth: float  # seating depth that counts as inserted
    color: str | None = None  # port color tag, None = uncolored


@dataclass(frozen=True)
class ToolTipSpec:
    offset: np.ndarray
    radius: float


@dataclass(frozen=True)
class PaintSpec:
    radius: float  # paintable disc radius on the local top face
    cells: int  # grid is cells x cells over the inscribed square
    top_z: float  # local z of the paintable face


@dataclass(frozen=True)
class Body:
    """Static definition of a rigid body (pose lives in SceneState)."""

    id: str
    parts: tuple  # ((Pose local offset, primitive), ...)
    color: str
    static: bool
    collider: bool
    grasp: GraspSpec | None = None
    plug: PlugSpec | None = None
    sockets: tuple = ()
    tool_tip: ToolTipSpec | None = None
    hang_point: np.ndarray | None = None
    hook_point: np.ndarray | None = None
    paint: PaintSpec | None = None
    contact_local: np.ndarray = None  # precomputed contact sample points
    surface_local: np.ndarray = None  # precomputed visibility sample points

    def local_aabb(self):
        los, his = [], []
        for off, prim in self.parts:
            lo, hi = shapes.aabb_of(off, prim)
            los.append(lo)
            his.append(hi)
        return np.min(los, axis=0), np.max(his, axis=0)


@dataclass(frozen=True)
class RobotState:
    """Both end-effector poses plus gripper opening scalars in [0, 1]."""

    left_ee: Pose
    right_ee: Pose
    left_gripper: float
    right_gripper: float

    def __post_init__(self):
        object.__setattr__(self, "left_gripper", float(min(1.0, max(0.0, self.left_gripper))))
        object.__setattr__(self, "right_gripper", float(min(1.0, max(0.0, self.right_gripper))))

    def to_array(self) -> np.ndarray:
        """16 numbers: left pose (7), right pose (7), left grip, right grip."""
        return np.concatenate(
            [
                self.left_ee.to_array(),
                self.right_ee.to_array(),
                [self.left_gripper, self.right_gripper],
            ]
        )

    @staticmethod
    def from_array(a: np.ndarray) -> "RobotState":
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (16,):
            raise ValueError(f"robot state needs 16 numbers, got {a.shape}")
        return RobotState(Pose.from_array(a[0:7]), Pose.from_array(a[7:14]), a[14], a[15])

    def ee(self, arm: str) -> Pose:
        return self.left_ee if arm == "left" else self.right_ee

    def gripper(self, arm: str) -> float:
        return self.left_gripper if arm == "left" else self.right_gripper


@dataclass(frozen=True)
class Attachment:
    body_id: str
    offset: Pose  # held body pose in the EE frame


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.1  # recording and integration clock
    k_p: float = 500.0  # contact stiffness N/m
    k_d: float = 10.0  # contact damping N*s/m
    mu: float = 0.3  # tangential drag coefficient
    max_penetration: float = 0.005
    max_step_translation: float = 0.05
    max_step_rotation: float = 0.2
    grasp_jitter_t: float = 0.008
    grasp_jitter_r: float = 0.15
    tip_radius: float = 0.012
    grasp_close_threshold: float = 0.45
    grasp_open_threshold: float = 0.55
    knock_force: float = 2.0  # downward force that advances a seated nail
    knock_advance: float = 0.005


# Fixed desk geometry: table top is z = 0, robot base side is -y.
LEFT_SHOULDER = np.array([-0.28, -0.42, 0.32])
RIGHT_SHOULDER = np.array([0.28, -0.42, 0.32])
ARM_REACH = 0.85
# Tool axis (EE local +z) points straight down at home.
TOOL_DOWN = np.array([0.0, 1.0, 0.0, 0.0])
HOME_LEFT = Pose(np.array([-0.25, -0.26, 0.18]), TOOL_DOWN)
HOME_RIGHT = Pose(np.array([0.25, -0.26, 0.18]), TOOL_DOWN)


@dataclass(frozen=True)
class SceneState:
    """Immutable world snapshot; stepping returns a fresh instance."""

    bodies: tuple  # Body definitions, fixed for the scene lifetime
    poses: dict  # body id -> Pose
    robot: RobotState
    attachments: dict  # arm -> Attachment
    tick: int
    rng_state: dict
    seated: dict = field(default_factory=dict)  # plug body id -> (host id, socket name)
    hanging: dict = field(default_factory=dict)  # body id -> (rack id,)
    paint: dict = field(default_factory=dict)  # body id -> frozenset(cell idx)
    push_forces: dict = field(default_factory=dict)  # body id -> force vec (diagnostic)
    events: tuple = ()  # events raised by the last step (grasps, releases, ...)
    params: SimParams = field(default_factory=SimParams)
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def body(self, body_id: str) -> Body:
        for b in self.bodies:
            if b.id == body_id:
                return b
        raise SceneError(f"unknown body {body_id!r}")

    def pose_of(self, body_id: str) -> Pose:
        return self.poses[body_id]

    def has_body(self, body_id: str) -> bool:
        return any(b.id == body_id for b in self.bodies)

    def held_body(self, arm: str) -> str | None:
        a = self.attachments.get(arm)
        return a.body_id if a else None

    def rng(self) -> np.random.Generator:
        gen = np.random.Generator(np.random.PCG64())
        gen.bit_generator.state = self.rng_state
        return gen

    def world_parts(self, exclude: frozenset = frozenset(), colliders_only: bool = True) -> PartSet:
        """Flattened world-frame part set, cached per snapshot."""
        key = (exclude, colliders_only)
        if key not in self._cache:
            parts = []
            for i, b in enumerate(self.bodies):
                if b.id in exclude or (colliders_only and not b.collider):
                    continue
                world = self.poses[b.id]
                wr = world.rotation()
                wp = world.position
                for off, prim in b.parts:
                    parts.append((i, wr @ off.rotation(), wp + wr @ off.position, prim))
            self._cache[key] = PartSet(parts)
        return self._cache[key]


def _parse_vec(v, n, what):
    try:
        a = np.asarray(v, dtype=np.float64).reshape(n)
    except Exception as e:
        raise SceneError(f"{what}: expected {n} numbers, got {v!r}") from e
    if not np.all(np.isfinite(a)):
        raise SceneError(f"{what}: non-finite values")
    return a


def _parse_pose(d, what) -> Pose:
    if d is None:
        return Pose.identity()
    pos = _parse_vec(d.get("position", (0, 0, 0)), 3, f"{what}.position")
    quat = d.get("quat")
    if quat is None:
        q = np.array([1.0, 0.0, 0.0, 0.0])
    else:
        q = _parse_vec(quat, 4, f"{what}.quat")
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise SceneError(f"{what}.quat: not a unit quaternion")
        q = canonicalize_quat(q)
    return Pose(pos, q)


def _parse_prim(d, what):
    kind = d.get("type")
    if kind == "box":
        h = _parse_vec(d.get("half_extents"), 3, f"{what}.half_extents")
        if np.any(h <= 0):
            raise SceneError(f"{what}: half_extents must be positive")
        return BoxShape(tuple(float(x) for x in h))
    if kind == "cylinder":
        r = float(d.get("radius", 0.0))
        hh = float(d.get("half_height", 0.0))
        if r <= 0 or hh <= 0:
            raise SceneError(f"{what}: radius and half_height must be positive")
        return CylinderShape(r, hh)
    raise SceneError(f"{what}: unknown shape type {kind!r}")


def _parse_body(d, idx) -> Body:
    what = f"bodies[{idx}]"
    body_id = d.get("id")
    if not isinstance(body_id, str) or not body_id:
        raise SceneError(f"{what}: missing id")
    shape = d.get("shape")
    if not isinstance(shape, dict):
        raise SceneError(f"{what}: missing shape")
    if shape.get("type") == "composite":
        raw_parts = shape.get("parts")
        if not raw_parts:
            raise SceneError(f"{what}: composite with no parts")
        parts = tuple(
            (_parse_pose(p, f"{what}.parts[{j}]"), _parse_prim(p["shape"], f"{what}.parts[{j}]"))
            for j, p in enumerate(raw_parts)
        )
    else:
        parts = ((Pose.identity(), _parse_prim(shape, what)),)

    color = d.get("color", "gray")
    if color not in KNOWN_COLORS:
        raise SceneError(f"{what}: unknown color {color!r}")

    grasp = None
    if "grasp" in d:
        g = d["grasp"]
        grasp = GraspSpec(
            _parse_vec(g.get("anchor", (0, 0, 0)), 3, f"{what}.grasp.anchor"),
            float(g.get("radius", 0.04)),
            _parse_pose(g.get("hold_offset"), f"{what}.grasp.hold_offset"),
        )
    plug = None
    if "plug" in d:
        p = d["plug"]
        plug = PlugSpec(_parse_vec(p.get("tip"), 3, f"{what}.plug.tip"), float(p.get("radius", 0.002)))
    sockets = []
    for j, s in enumerate(d.get("sockets", ())):
        axis = _parse_vec(s.get("axis", (0, 0, -1)), 3, f"{what}.sockets[{j}].axis")
        nn = np.linalg.norm(axis)
        if nn < 1e-9:
            raise SceneError(f"{what}.sockets[{j}]: zero axis")
        sockets.append(
            SocketSpec(
                name=str(s.get("name", f"s{j}")),
                mouth=_parse_vec(s.get("mouth"), 3, f"{what}.sockets[{j}].mouth"),
                axis=axis / nn,
                clearance=float(s.get("clearance", 0.002)),
                chamfer_radius=float(s.get("chamfer_radius", 0.0065)),
                chamfer_depth=float(s.get("chamfer_depth", 0.008)),
                depth=float(s.get("depth", 0.01)),
                full_depth=float(s.get("full_depth", 0.008)),
                color=s.get("color"),
            )
        )
    tool_tip = None
    if "tool_tip" in d:
        t = d["tool_tip"]
        tool_tip = ToolTipSpec(
            _parse_vec(t.get("offset"), 3, f"{what}.tool_tip.offset"), float(t.get("radius", 0.01))
        )
    paint = None
    if "paint_top" in d:
        p = d["paint_top"]
        paint = PaintSpec(
            float(p.get("radius", 0.03)), int(p.get("cells", 4)), float(p.get("top_z", 0.0))
        )

    contact_local = np.vstack(
        [off.transform_points(shapes.contact_points(prim)) for off, prim in parts]
    )
    surf_seed = zlib.crc32(body_id.encode()) & 0xFFFFFFFF
    per_part = []
    total_area = sum(prim.volume() for _, prim in parts)  # volume as a crude area proxy
    k_each = max(3, VISIBILITY_SAMPLES // len(parts))
    for j, (off, prim) in enumerate(parts):
        pts = shapes.sample_surface(prim, k_each, surf_seed + j)
        per_part.append(off.transform_points(pts))
    surface_local = np.vstack(per_part)[:VISIBILITY_SAMPLES]

    return Body(
        id=body_id,
        parts=parts,
        color=color,
        static=bool(d.get("static", False)),
        collider=bool(d.get("collider", True)),
        grasp=grasp,
        plug=plug,
        sockets=tuple(sockets),
        tool_tip=tool_tip,
        hang_point=(
            _parse_vec(d["hang_point"], 3, f"{what}.hang_point") if "hang_point" in d else None
        ),
        hook_point=(
            _parse_vec(d["hook_point"], 3, f"{what}.hook_point") if "hook_point" in d else None
        ),
        paint=paint,
        contact_local=contact_local,
        surface_local=surface_local,
    )


def validate_description(description: dict) -> None:
    """Raise SceneError with a descriptive message if the document is malformed."""
    if not isinstance(description, dict):
        raise SceneError("scene description must be a mapping")
    version = description.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SceneError(f"unsupported scene schema_version {version!r} (expected {SCHEMA_VERSION})")
    bodies_raw = description.get("bodies", [])
    if not isinstance(bodies_raw, list):
        raise SceneError("bodies must be a list")
    seen = set()
    bodies = []
    for i, d in enumerate(bodies_raw):
        b = _parse_body(d, i)
        if b.id in seen:
            raise SceneError(f"duplicate body id {b.id!r}")
        seen.add(b.id)
        bodies.append((b, _parse_pose(d.get("pose"), f"bodies[{i}].pose")))

    # No two static colliders may overlap with positive volume.
    statics = [(b, p) for b, p in bodies if b.static and b.collider]
    eps = 1e-9
    for i in range(len(statics)):
        for j in range(i + 1, len(statics)):
            bi, pi = statics[i]
            bj, pj = statics[j]
            for off_a, prim_a in bi.parts:
                lo_a, hi_a = shapes.aabb_of(pi.compose(off_a), prim_a)
                for off_b, prim_b in bj.parts:
                    lo_b, hi_b = shapes.aabb_of(pj.compose(off_b), prim_b)
                    overlap = np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b)
                    if np.all(overlap > eps):
                        raise SceneError(
                            f"static bodies {bi.id!r} and {bj.id!r} overlap "
                            f"(by {overlap.min():.4f} m)"
                        )
    hidden = description.get("hidden", [])
    for h in hidden:
        if h.get("body") not in seen:
            raise SceneError(f"hidden attribute references unknown body {h.get('body')!r}")


def reset(description: dict, seed: int, params: SimParams | None = None) -> SceneState:
    """Validate a description and build the deterministic initial state."""
    validate_description(description)
    params = params or SimParams()
    bodies = []
    poses = {}
    for i, d in enumerate(description.get("bodies", [])):
        b = _parse_body(d, i)
        bodies.append(b)
        poses[b.id] = _parse_pose(d.get("pose"), f"bodies[{i}].pose")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    robot = RobotState(HOME_LEFT, HOME_RIGHT, 1.0, 1.0)
    return SceneState(
        bodies=tuple(bodies),
        poses=poses,
        robot=robot,
        attachments={},
        tick=0,
        rng_state=rng.bit_generator.state,
        params=params,
    )


def hidden_attributes(description: dict) -> list:
    """(body_id, attr) pairs the task treats as initially unobservable."""
    return [(h["body"], h.get("attr", "color")) for h in description.get("hidden", [])]


def advance_rng(state: SceneState, draw) -> tuple:
    """Run ``draw(generator)`` and return (result, new rng_state dict)."""
    gen = state.rng()
    result = draw(gen)
    return result, gen.bit_generator.state


def with_updates(state: SceneState, **kw) -> SceneState:
    kw.setdefault("_cache", {})
    return replace(state, **kw)
