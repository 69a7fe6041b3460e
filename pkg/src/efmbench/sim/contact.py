"""Penalty-based contact synthesis for end effectors and held objects.

Contacts are point samples against the signed-distance field of the rest
of the scene, plus an analytic chamfered-hole model for insertion
geometries: lateral misalignment beyond the bore clearance rides the
countersink cone (reaction partly lateral, centering) and blocks depth
progress; aligned tips may descend into the bore against viscous drag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import Pose
from .scene import Body, SceneState, SimParams, SocketSpec


@dataclass(frozen=True)
class Wrench:
    """6D force/torque (N, N*m) at an end effector, world axes."""

    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        f = np.asarray(self.force, dtype=np.float64).reshape(3)
        t = np.asarray(self.torque, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(t))):
            raise ValueError("non-finite wrench")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "torque", t)

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    @staticmethod
    def zero() -> "Wrench":
        return Wrench()

    def is_zero(self) -> bool:
        return not (np.any(self.force) or np.any(self.torque))


@dataclass
class Contact:
    point: np.ndarray  # world contact point
    depth: float  # penetration depth (>= 0)
    normal: np.ndarray  # pushes the probing entity out of the target
    rate: float  # d(depth)/dt, positive while penetrating deeper
    velocity: np.ndarray  # world velocity of the probing point
    target: int  # body index in state.bodies, -1 for socket features
    kind: str  # tip | sample | tool | socket | bore


@dataclass
class EntityGeom:
    """Contact probes of one arm: the gripper tip sphere plus, when an
    object is held, its surface samples and optional tool tip."""

    points: np.ndarray  # (N, 3) now
    prev_points: np.ndarray  # (N, 3) at the previous configuration
    radii: np.ndarray  # (N,)
    kinds: list
    plug_tip: np.ndarray | None = None
    plug_tip_prev: np.ndarray | None = None
    held_idx: int = -1


def build_entity(
    state: SceneState,
    ee_pose: Pose,
    prev_ee_pose: Pose,
    held: Body | None,
    held_pose: Pose | None,
    prev_held_pose: Pose | None,
) -> EntityGeom:
    params = state.params
    pts = [ee_pose.position[None, :]]
    prev = [prev_ee_pose.position[None, :]]
    radii = [np.array([params.tip_radius])]
    kinds = ["tip"]
    plug_tip = plug_tip_prev = None
    held_idx = -1
    if held is not None:
        held_idx = [i for i, b in enumerate(state.bodies) if b.id == held.id][0]
        pts.append(held_pose.transform_points(held.contact_local))
        prev.append(prev_held_pose.transform_points(held.contact_local))
        radii.append(np.zeros(len(held.contact_local)))
        kinds += ["sample"] * len(held.contact_local)
        if held.tool_tip is not None:
            pts.append(held_pose.transform_point(held.tool_tip.offset)[None, :])
            prev.append(prev_held_pose.transform_point(held.tool_tip.offset)[None, :])
            radii.append(np.array([held.tool_tip.radius]))
            kinds.append("tool")
        if held.plug is not None:
            plug_tip = held_pose.transform_point(held.plug.tip)
            plug_tip_prev = prev_held_pose.transform_point(held.plug.tip)
    return EntityGeom(
        points=np.vstack(pts),
        prev_points=np.vstack(prev),
        radii=np.concatenate(radii),
        kinds=kinds,
        plug_tip=plug_tip,
        plug_tip_prev=plug_tip_prev,
        held_idx=held_idx,
    )


def find_socket(state: SceneState, tip_w: np.ndarray, capture_margin: float = 0.02):
    """Nearest socket whose capture cylinder contains the tip, if any.

    Returns (host body index, SocketSpec, mouth world, axis world) or None.
    """
    best = None
    best_lat = np.inf
    for i, b in enumerate(state.bodies):
        for s in b.sockets:
            pose = state.poses[b.id]
            mouth = pose.transform_point(s.mouth)
            axis = pose.rotation() @ s.axis
            rel = tip_w - mouth
            depth_along = float(rel @ axis)
            lat = np.linalg.norm(rel - depth_along * axis)
            if -capture_margin <= depth_along <= s.chamfer_depth + s.depth + 0.005:
                if lat <= s.chamfer_radius and lat < best_lat:
                    best = (i, s, mouth, axis)
                    best_lat = lat
    return best


def socket_contacts(
    tip: np.ndarray,
    tip_prev: np.ndarray,
    host_idx: int,
    spec: SocketSpec,
    mouth: np.ndarray,
    axis: np.ndarray,
    params: SimParams,
) -> list:
    """Contacts of a plug tip against a chamfered hole."""
    rel = tip - mouth
    s = float(rel @ axis)  # depth below the surface plane, along the hole
    lat_vec = rel - s * axis
    lat = float(np.linalg.norm(lat_vec))
    lat_dir = lat_vec / lat if lat > 1e-12 else np.zeros(3)

    rel_p = tip_prev - mouth
    s_prev = float(rel_p @ axis)
    ds = (s - s_prev) / params.dt
    vel = (tip - tip_prev) / params.dt

    out = []
    total_depth = spec.chamfer_depth + spec.depth
    # Cone wall steepness: lateral/axial reaction ratio on the countersink.
    k = spec.chamfer_depth / max(spec.chamfer_radius - spec.clearance, 1e-6)
    root = np.sqrt(1.0 + k * k)

    if lat > spec.clearance:
        if s <= spec.chamfer_depth:
            # Riding the countersink cone.
            s_cone = k * (spec.chamfer_radius - lat)
            gap = s - s_cone
            if gap > 0.0:
                d_perp = gap / root
                normal = (-k * lat_dir - axis) / root
                gap_prev = s_prev - k * (spec.chamfer_radius - float(np.linalg.norm(rel_p - s_prev * axis)))
                rate = (max(gap, 0.0) - max(gap_prev, 0.0)) / root / params.dt
                out.append(Contact(tip.copy(), d_perp, normal, rate, vel, host_idx, "socket"))
        else:
            # In the bore but off axis: hole wall centers the tip.
            d = lat - spec.clearance
            out.append(Contact(tip.copy(), d, -lat_dir, 0.0, vel, host_idx, "socket"))
    if s > total_depth:
        # Bottomed out.
        d = s - total_depth
        out.append(Contact(tip.copy(), d, -axis, ds, vel, host_idx, "socket"))
    if lat <= spec.clearance and 0.0 < s <= total_depth and abs(ds) > 1e-9:
        # Sliding in the bore: viscous drag opposing axial motion.
        out.append(Contact(tip.copy(), 0.0, -np.sign(ds) * axis, abs(ds), vel, host_idx, "bore"))
    return out


def generic_contacts(
    entity: EntityGeom,
    state_now: SceneState,
    state_prev: SceneState,
    exclude: frozenset,
    dt: float,
) -> list:
    """Point-sample contacts of an entity against everything not excluded."""
    parts_now = state_now.world_parts(exclude=exclude)
    parts_prev = state_prev.world_parts(exclude=exclude)
    if parts_now.n == 0:
        return []
    dist, normal, owner = parts_now.sdf(entity.points)
    depth = entity.radii - dist
    hits = np.nonzero(depth > 0.0)[0]
    if len(hits) == 0:
        return []
    dist_prev, _, _ = parts_prev.sdf(entity.prev_points[hits])
    out = []
    for j, i in enumerate(hits):
        d_prev = max(float(entity.radii[i] - dist_prev[j]), 0.0)
        rate = (float(depth[i]) - d_prev) / dt
        vel = (entity.points[i] - entity.prev_points[i]) / dt
        out.append(
            Contact(
                point=entity.points[i].copy(),
                depth=float(depth[i]),
                normal=normal[i].copy(),
                rate=rate,
                velocity=vel,
                target=int(owner[i]),
                kind=entity.kinds[i],
            )
        )
    return out


def entity_contacts(
    entity: EntityGeom,
    state_now: SceneState,
    state_prev: SceneState,
    exclude: frozenset,
) -> list:
    """Generic plus socket contacts for one arm entity.

    While a plug tip is engaged with a socket the host body is dropped
    from the generic query (the hole is not carved out of its solid);
    the socket model supplies all reaction there.
    """
    params = state_now.params
    socket_cs = []
    gen_exclude = exclude
    probe_tip = entity.plug_tip is not None
    if entity.plug_tip is not None:
        hit = find_socket(state_now, entity.plug_tip)
        if hit is not None and state_now.bodies[hit[0]].id not in exclude:
            host_idx, spec, mouth, axis = hit
            socket_cs = socket_contacts(
                entity.plug_tip, entity.plug_tip_prev, host_idx, spec, mouth, axis, params
            )
            gen_exclude = exclude | {state_now.bodies[host_idx].id}
            probe_tip = False
    contacts = generic_contacts(entity, state_now, state_prev, gen_exclude, params.dt)
    if probe_tip:
        # Tip outside any capture region: plain sphere probe of the tip.
        parts = state_now.world_parts(exclude=gen_exclude)
        if parts.n:
            dist, normal, owner = parts.sdf(entity.plug_tip[None, :])
            held = state_now.bodies[entity.held_idx]
            depth = held.plug.radius - float(dist[0])
            if depth > 0.0:
                dp, _, _ = state_prev.world_parts(exclude=gen_exclude).sdf(
                    entity.plug_tip_prev[None, :]
                )
                d_prev = max(held.plug.radius - float(dp[0]), 0.0)
                rate = (depth - d_prev) / params.dt
                vel = (entity.plug_tip - entity.plug_tip_prev) / params.dt
                contacts.append(
                    Contact(
                        entity.plug_tip.copy(),
                        depth,
                        normal[0].copy(),
                        rate,
                        vel,
                        int(owner[0]),
                        "tip",
                    )
                )
    return contacts + socket_cs


def contact_forces(contacts: list, params: SimParams):
    """Per-contact world forces. Normal penalty is clamped non-negative;
    tangential drag opposes sliding at mu times the normal force."""
    forces = []
    for c in contacts:
        if c.kind == "bore":
            f = params.k_d * c.rate * c.normal
        else:
            fn = max(params.k_p * c.depth + params.k_d * c.rate, 0.0)
            f = fn * c.normal
            v_t = c.velocity - (c.velocity @ c.normal) * c.normal
            speed = np.linalg.norm(v_t)
            if speed > 1e-6 and fn > 0.0:
                f = f - params.mu * fn * (v_t / speed)
        forces.append(f)
    return forces


def assemble_wrench(contacts: list, forces: list, ee_pos: np.ndarray) -> Wrench:
    force = np.zeros(3)
    torque = np.zeros(3)
    for c, f in zip(contacts, forces):
        force += f
        torque += np.cross(c.point - ee_pos, f)
    return Wrench(force, torque)


def compute_contact_wrench(
    ee_pose: Pose,
    held_object: str | None,
    scene: SceneState,
    prev_ee_pose: Pose | None = None,
) -> Wrench:
    """Wrench on an end effector at the given pose in the given scene.

    Without a previous pose the configuration is treated as stationary
    (no damping or drag terms).
    """
    prev = prev_ee_pose or ee_pose
    held = scene.body(held_object) if held_object else None
    if held is not None:
        held_pose = scene.poses[held_object]
        # The held object moves rigidly with the EE, so its previous pose
        # follows from the EE delta.
        prev_held = prev.compose(ee_pose.inverse().compose(held_pose))
        entity = build_entity(scene, ee_pose, prev, held, held_pose, prev_held)
        exclude = frozenset([held_object])
    else:
        entity = build_entity(scene, ee_pose, prev, None, None, None)
        exclude = frozenset()
    contacts = entity_contacts(entity, scene, scene, exclude)
    forces = contact_forces(contacts, scene.params)
    return assemble_wrench(contacts, forces, ee_pose.position)


def max_penetration_depth(entity: EntityGeom, state: SceneState, exclude: frozenset):
    """Deepest penetration (depth, normal) of an entity, socket-aware.

    Bore drag pseudo-contacts are ignored (no geometric overlap).
    """
    contacts = entity_contacts(entity, state, state, exclude)
    worst = None
    for c in contacts:
        if c.kind == "bore":
            continue
        if worst is None or c.depth > worst.depth:
            worst = c
    if worst is None:
        return 0.0, None
    return worst.depth, worst.normal
