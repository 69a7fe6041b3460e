"""Shape primitives with signed distances, ray casts, and surface sampling.

Boxes are axis-aligned in their local frame (half extents); cylinders have
their axis along local z. Composite bodies are flattened into lists of
(world pose, primitive) parts before querying.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Pose


@dataclass(frozen=True)
class BoxShape:
    half_extents: tuple  # (hx, hy, hz)

    def aabb_local(self):
        h = np.array(self.half_extents)
        return -h, h

    def volume(self):
        hx, hy, hz = self.half_extents
        return 8.0 * hx * hy * hz


@dataclass(frozen=True)
class CylinderShape:
    radius: float
    half_height: float

    def aabb_local(self):
        r, hh = self.radius, self.half_height
        return np.array([-r, -r, -hh]), np.array([r, r, hh])

    def volume(self):
        return np.pi * self.radius**2 * 2.0 * self.half_height


Primitive = BoxShape | CylinderShape


def sdf_box(points: np.ndarray, half: np.ndarray):
    """Signed distance and outward normal of an origin-centered box.

    points: (N, 3) in the box local frame. Returns (dist (N,), normal (N, 3)).
    """
    p = np.atleast_2d(points)
    q = np.abs(p) - half
    outside = np.maximum(q, 0.0)
    d_out = np.linalg.norm(outside, axis=1)
    d_in = np.minimum(np.max(q, axis=1), 0.0)
    dist = d_out + d_in

    normal = np.where(p >= 0.0, 1.0, -1.0) * outside
    nn = np.linalg.norm(normal, axis=1, keepdims=True)
    inside = nn[:, 0] < 1e-12
    if np.any(inside):
        # Inside: normal of the nearest face.
        axis = np.argmax(q[inside], axis=1)
        n_in = np.zeros((int(np.sum(inside)), 3))
        sign = np.where(p[inside, axis] >= 0.0, 1.0, -1.0)
        n_in[np.arange(len(axis)), axis] = sign
        normal = normal.copy()
        normal[inside] = n_in
        nn = np.linalg.norm(normal, axis=1, keepdims=True)
    normal = normal / np.maximum(nn, 1e-12)
    return dist, normal


def sdf_cylinder(points: np.ndarray, radius: float, half_height: float):
    p = np.atleast_2d(points)
    rr = np.linalg.norm(p[:, :2], axis=1)
    dr = rr - radius
    dz = np.abs(p[:, 2]) - half_height
    d = np.stack([dr, dz], axis=1)
    outside = np.maximum(d, 0.0)
    d_out = np.linalg.norm(outside, axis=1)
    d_in = np.minimum(np.max(d, axis=1), 0.0)
    dist = d_out + d_in

    radial = np.zeros_like(p)
    safe = rr > 1e-12
    radial[safe, 0] = p[safe, 0] / rr[safe]
    radial[safe, 1] = p[safe, 1] / rr[safe]
    radial[~safe, 0] = 1.0
    zsign = np.where(p[:, 2] >= 0.0, 1.0, -1.0)

    normal = np.zeros_like(p)
    both_out = (d[:, 0] > 0) & (d[:, 1] > 0)
    n_edge = radial * outside[:, 0:1]
    n_edge[:, 2] = zsign * outside[:, 1]
    picks_radial = d[:, 0] >= d[:, 1]
    normal[picks_radial] = radial[picks_radial]
    normal[~picks_radial, :] = 0.0
    normal[~picks_radial, 2] = zsign[~picks_radial]
    normal[both_out] = n_edge[both_out]
    nn = np.linalg.norm(normal, axis=1, keepdims=True)
    normal = normal / np.maximum(nn, 1e-12)
    return dist, normal


def ray_box(origins: np.ndarray, dirs: np.ndarray, half: np.ndarray):
    """Slab test. origins/dirs: (N, 3) in box local frame. Returns t (N,), inf = miss."""
    o = np.atleast_2d(origins)
    d = np.atleast_2d(dirs)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-half - o) * inv
        t2 = (half - o) * inv
    # Parallel rays: component hits only if origin within the slab.
    par = np.abs(d) < 1e-15
    lo = np.minimum(t1, t2)
    hi = np.maximum(t1, t2)
    inside_slab = np.abs(o) <= half
    lo = np.where(par, np.where(inside_slab, -np.inf, np.inf), lo)
    hi = np.where(par, np.where(inside_slab, np.inf, -np.inf), hi)
    tmin = np.max(lo, axis=1)
    tmax = np.min(hi, axis=1)
    hit = (tmax >= tmin) & (tmax > 0.0)
    t = np.where(tmin > 0.0, tmin, tmax)
    return np.where(hit, t, np.inf)


def ray_cylinder(origins: np.ndarray, dirs: np.ndarray, radius: float, half_height: float):
    o = np.atleast_2d(origins)
    d = np.atleast_2d(dirs)
    n = o.shape[0]
    t_best = np.full(n, np.inf)

    # Lateral surface: solve |o.xy + t d.xy| = r.
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = 2.0 * (o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1])
    c = o[:, 0] ** 2 + o[:, 1] ** 2 - radius**2
    disc = b * b - 4 * a * c
    ok = (disc >= 0.0) & (a > 1e-18)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        for sign in (-1.0, 1.0):
            t = np.where(ok, (-b + sign * sq) / (2 * a), np.inf)
            z = o[:, 2] + t * d[:, 2]
            good = ok & (t > 0.0) & (np.abs(z) <= half_height)
            t_best = np.where(good & (t < t_best), t, t_best)

    # Caps.
    with np.errstate(divide="ignore", invalid="ignore"):
        for zc in (-half_height, half_height):
            t = (zc - o[:, 2]) / d[:, 2]
            x = o[:, 0] + t * d[:, 0]
            y = o[:, 1] + t * d[:, 1]
            good = (np.abs(d[:, 2]) > 1e-15) & (t > 0.0) & (x * x + y * y <= radius**2)
            t_best = np.where(good & (t < t_best), t, t_best)
    return t_best


def sample_surface(prim: Primitive, k: int, seed: int) -> np.ndarray:
    """k deterministic, area-weighted points on the primitive surface (local frame)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    if isinstance(prim, BoxShape):
        hx, hy, hz = prim.half_extents
        areas = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy])
        areas = areas / areas.sum()
        faces = rng.choice(6, size=k, p=areas)
        u = rng.uniform(-1.0, 1.0, size=(k, 2))
        pts = np.zeros((k, 3))
        for i, f in enumerate(faces):
            axis = f // 2
            sign = 1.0 if f % 2 == 0 else -1.0
            others = [a for a in range(3) if a != axis]
            h = [hx, hy, hz]
            pts[i, axis] = sign * h[axis]
            pts[i, others[0]] = u[i, 0] * h[others[0]]
            pts[i, others[1]] = u[i, 1] * h[others[1]]
        return pts
    if isinstance(prim, CylinderShape):
        r, hh = prim.radius, prim.half_height
        a_side = 2 * np.pi * r * 2 * hh
        a_cap = np.pi * r * r
        areas = np.array([a_side, a_cap, a_cap])
        areas = areas / areas.sum()
        which = rng.choice(3, size=k, p=areas)
        theta = rng.uniform(0.0, 2 * np.pi, size=k)
        pts = np.zeros((k, 3))
        for i, w in enumerate(which):
            if w == 0:
                pts[i] = [r * np.cos(theta[i]), r * np.sin(theta[i]), rng.uniform(-hh, hh)]
            else:
                rr = r * np.sqrt(rng.uniform())
                z = hh if w == 1 else -hh
                pts[i] = [rr * np.cos(theta[i]), rr * np.sin(theta[i]), z]
        return pts
    raise TypeError(f"unsupported primitive {type(prim).__name__}")


def contact_points(prim: Primitive) -> np.ndarray:
    """Fixed contact-sample points on the surface (local frame): corners,
    face centers for boxes; cap rings and centers for cylinders."""
    if isinstance(prim, BoxShape):
        hx, hy, hz = prim.half_extents
        corners = np.array(
            [[sx * hx, sy * hy, sz * hz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
        )
        faces = np.array(
            [
                [hx, 0, 0],
                [-hx, 0, 0],
                [0, hy, 0],
                [0, -hy, 0],
                [0, 0, hz],
                [0, 0, -hz],
            ]
        )
        return np.vstack([corners, faces])
    if isinstance(prim, CylinderShape):
        r, hh = prim.radius, prim.half_height
        ang = np.linspace(0.0, 2 * np.pi, 6, endpoint=False)
        ring = np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
        top = np.column_stack([ring, np.full(6, hh)])
        bot = np.column_stack([ring, np.full(6, -hh)])
        caps = np.array([[0, 0, hh], [0, 0, -hh]])
        return np.vstack([top, bot, caps])
    raise TypeError(f"unsupported primitive {type(prim).__name__}")


class PartSet:
    """Flattened, vectorizable view of (owner index, world R, world p, primitive) parts.

    ``from_poses`` accepts (owner, Pose, prim) tuples; the raw constructor
    takes rotation matrices and translations directly.
    """

    def __init__(self, parts):
        # parts: list of (owner, R (3,3), p (3,), prim)
        self.owners = np.array([p[0] for p in parts], dtype=np.int64)
        self.n = len(parts)
        box_idx, cyl_idx = [], []
        for i, (_, _, _, prim) in enumerate(parts):
            (box_idx if isinstance(prim, BoxShape) else cyl_idx).append(i)
        self._parts = parts
        self.box_idx = np.array(box_idx, dtype=np.int64)
        self.cyl_idx = np.array(cyl_idx, dtype=np.int64)
        if box_idx:
            self.box_R = np.stack([parts[i][1] for i in box_idx])
            self.box_p = np.stack([parts[i][2] for i in box_idx])
            self.box_h = np.stack([np.array(parts[i][3].half_extents) for i in box_idx])
        if cyl_idx:
            self.cyl_R = np.stack([parts[i][1] for i in cyl_idx])
            self.cyl_p = np.stack([parts[i][2] for i in cyl_idx])
            self.cyl_r = np.array([parts[i][3].radius for i in cyl_idx])
            self.cyl_hh = np.array([parts[i][3].half_height for i in cyl_idx])

    @staticmethod
    def from_poses(parts):
        return PartSet([(o, pose.rotation(), pose.position, prim) for o, pose, prim in parts])

    def sdf_matrix(self, points: np.ndarray) -> np.ndarray:
        """Signed distance of every point to every part: (N, n) matrix."""
        pts = np.atleast_2d(points)
        n = pts.shape[0]
        out = np.full((n, self.n), np.inf)
        if len(self.box_idx):
            diff = pts[:, None, :] - self.box_p[None, :, :]
            local = np.einsum("nbi,bij->nbj", diff, self.box_R)
            q = np.abs(local) - self.box_h[None, :, :]
            outside = np.maximum(q, 0.0)
            d_out = np.sqrt(np.sum(outside * outside, axis=2))
            d_in = np.minimum(np.max(q, axis=2), 0.0)
            out[:, self.box_idx] = d_out + d_in
        if len(self.cyl_idx):
            diff = pts[:, None, :] - self.cyl_p[None, :, :]
            local = np.einsum("nci,cij->ncj", diff, self.cyl_R)
            rr = np.hypot(local[:, :, 0], local[:, :, 1])
            dr = rr - self.cyl_r[None, :]
            dz = np.abs(local[:, :, 2]) - self.cyl_hh[None, :]
            o0 = np.maximum(dr, 0.0)
            o1 = np.maximum(dz, 0.0)
            d_out = np.hypot(o0, o1)
            d_in = np.minimum(np.maximum(dr, dz), 0.0)
            out[:, self.cyl_idx] = d_out + d_in
        return out

    def _part_normal(self, idx: int, point: np.ndarray) -> np.ndarray:
        _, R, p, prim = self._parts[idx]
        local = (point[None, :] - p) @ R
        if isinstance(prim, BoxShape):
            _, nl = sdf_box(local, np.array(prim.half_extents))
        else:
            _, nl = sdf_cylinder(local, prim.radius, prim.half_height)
        return nl[0] @ R.T

    def sdf(self, points: np.ndarray, skip_owner_mask: np.ndarray | None = None):
        """Min signed distance over parts.

        points: (N, 3) world. skip_owner_mask: optional bool (n_owners,)
        marking owners to ignore. Returns (dist (N,), normal (N, 3) world,
        owner (N,) index, -1 where no parts).
        """
        pts = np.atleast_2d(points)
        n = pts.shape[0]
        mat = self.sdf_matrix(pts)
        if skip_owner_mask is not None:
            skip_cols = skip_owner_mask[self.owners]
            mat = np.where(skip_cols[None, :], np.inf, mat)
        best_idx = np.argmin(mat, axis=1)
        best = mat[np.arange(n), best_idx]
        owner = np.where(np.isfinite(best), self.owners[best_idx], -1)
        normal = np.zeros((n, 3))
        # Normals only matter where a contact can form (probe radii stay
        # well under 15 mm).
        need = best < 0.015
        for i in np.nonzero(need)[0]:
            normal[i] = self._part_normal(int(best_idx[i]), pts[i])
        return best, normal, owner

    def raycast_matrix(self, origins: np.ndarray, dirs: np.ndarray):
        """Hit distances of every ray against every part: (R, n) matrix.

        Misses are +inf; t is in units of |dir|.
        """
        o = np.atleast_2d(origins)
        d = np.atleast_2d(dirs)
        r = o.shape[0]
        t = np.full((r, self.n), np.inf)
        if len(self.box_idx):
            diff = o[:, None, :] - self.box_p[None, :, :]
            ol = np.einsum("rbi,bij->rbj", diff, self.box_R)
            dl = np.einsum("ri,bij->rbj", d, self.box_R)
            h = self.box_h[None, :, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                inv = 1.0 / dl
                t1 = (-h - ol) * inv
                t2 = (h - ol) * inv
            par = np.abs(dl) < 1e-15
            lo = np.minimum(t1, t2)
            hi = np.maximum(t1, t2)
            inside = np.abs(ol) <= h
            lo = np.where(par, np.where(inside, -np.inf, np.inf), lo)
            hi = np.where(par, np.where(inside, np.inf, -np.inf), hi)
            tmin = np.max(lo, axis=2)
            tmax = np.min(hi, axis=2)
            hit = (tmax >= tmin) & (tmax > 0.0)
            tb = np.where(tmin > 0.0, tmin, tmax)
            t[:, self.box_idx] = np.where(hit, tb, np.inf)
        if len(self.cyl_idx):
            diff = o[:, None, :] - self.cyl_p[None, :, :]
            ol = np.einsum("rci,cij->rcj", diff, self.cyl_R)
            dl = np.einsum("ri,cij->rcj", d, self.cyl_R)
            rad = self.cyl_r[None, :]
            hh = self.cyl_hh[None, :]
            tc = np.full((r, len(self.cyl_idx)), np.inf)
            a = dl[:, :, 0] ** 2 + dl[:, :, 1] ** 2
            b = 2.0 * (ol[:, :, 0] * dl[:, :, 0] + ol[:, :, 1] * dl[:, :, 1])
            c = ol[:, :, 0] ** 2 + ol[:, :, 1] ** 2 - rad**2
            disc = b * b - 4 * a * c
            ok = (disc >= 0.0) & (a > 1e-18)
            sq = np.sqrt(np.where(ok, disc, 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                for sign in (-1.0, 1.0):
                    tt = np.where(ok, (-b + sign * sq) / (2 * a), np.inf)
                    z = ol[:, :, 2] + tt * dl[:, :, 2]
                    good = ok & (tt > 0.0) & (np.abs(z) <= hh)
                    tc = np.where(good & (tt < tc), tt, tc)
                for which in (0, 1):
                    zc = np.where(which == 0, -hh, hh)
                    tt = (zc - ol[:, :, 2]) / dl[:, :, 2]
                    x = ol[:, :, 0] + tt * dl[:, :, 0]
                    y = ol[:, :, 1] + tt * dl[:, :, 1]
                    good = (np.abs(dl[:, :, 2]) > 1e-15) & (tt > 0.0) & (x * x + y * y <= rad**2)
                    tc = np.where(good & (tt < tc), tt, tc)
            t[:, self.cyl_idx] = tc
        return t

    def raycast(self, origins: np.ndarray, dirs: np.ndarray, skip_owner_mask=None):
        """First-hit parametric distance along each ray.

        origins, dirs: (N, 3) world, dirs need not be unit (t is in units of |dir|).
        Returns (t (N,), owner (N,), -1 where miss).
        """
        o = np.atleast_2d(origins)
        d = np.atleast_2d(dirs)
        n = o.shape[0]
        t_best = np.full(n, np.inf)
        owner = np.full(n, -1, dtype=np.int64)
        for idx in self.box_idx:
            _, pose, prim = self._parts[idx]
            if skip_owner_mask is not None and skip_owner_mask[self.owners[idx]]:
                continue
            R = pose.rotation()
            ol = (o - pose.position) @ R
            dl = d @ R
            t = ray_box(ol, dl, np.array(prim.half_extents))
            better = t < t_best
            t_best = np.where(better, t, t_best)
            owner[better] = self.owners[idx]
        for idx in self.cyl_idx:
            _, pose, prim = self._parts[idx]
            if skip_owner_mask is not None and skip_owner_mask[self.owners[idx]]:
                continue
            R = pose.rotation()
            ol = (o - pose.position) @ R
            dl = d @ R
            t = ray_cylinder(ol, dl, prim.radius, prim.half_height)
            better = t < t_best
            t_best = np.where(better, t, t_best)
            owner[better] = self.owners[idx]
        return t_best, owner


def aabb_of(pose: Pose, prim: Primitive):
    """World-frame AABB of a posed primitive."""
    lo, hi = prim.aabb_local()
    corners = np.array(
        [[a, b, c] for a in (lo[0], hi[0]) for b in (lo[1], hi[1]) for c in (lo[2], hi[2])]
    )
    w = pose.transform_points(corners)
    return w.min(axis=0), w.max(axis=0)
