"""Rigid-transform math: unit quaternions (w, x, y, z) and poses.

All positions are meters in a fixed world frame (z up). Quaternions are
kept normalized and canonicalized to w >= 0 so every orientation has a
unique serialization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUAT_NORM_TOL = 1e-9


def canonicalize_quat(q: np.ndarray) -> np.ndarray:
    """Normalize and flip sign so w >= 0 (ties broken on x, y, z)."""
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("quaternion has zero or non-finite norm")
    q = q / n
    if q[0] < 0.0:
        q = -q
    elif q[0] == 0.0:
        for c in q[1:]:
            if c != 0.0:
                if c < 0.0:
                    q = -q
                break
    return q


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by quaternion q. v may be (3,) or (N, 3)."""
    v = np.asarray(v, dtype=np.float64)
    w, x, y, z = q
    R = quat_to_matrix(q)
    if v.ndim == 1:
        return R @ v
    return v @ R.T


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(R)))
        if i == 0:
            s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2
            q = np.array(
                [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
            )
        elif i == 1:
            s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2
            q = np.array(
                [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
            )
        else:
            s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2
            q = np.array(
                [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
            )
    return canonicalize_quat(q)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    axis = axis / n
    h = 0.5 * angle
    return canonicalize_quat(np.concatenate([[np.cos(h)], np.sin(h) * axis]))


def quat_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Rotation angle (rad) taking orientation a to orientation b."""
    d = abs(float(np.dot(a, b)))
    d = min(1.0, d)
    return 2.0 * np.arccos(d)


def quat_slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    d = float(np.dot(a, b))
    if d < 0.0:
        b = -b
        d = -d
    if d > 1.0 - 1e-12:
        return canonicalize_quat(a + t * (b - a))
    theta = np.arccos(min(1.0, d))
    s = np.sin(theta)
    return canonicalize_quat((np.sin((1 - t) * theta) / s) * a + (np.sin(t * theta) / s) * b)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: position (m) + unit quaternion (w, x, y, z), w >= 0."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quat: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(3)
        q = np.asarray(self.quat, dtype=np.float64).reshape(4)
        if not np.all(np.isfinite(p)) or not np.all(np.isfinite(q)):
            raise ValueError("non-finite pose")
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise ValueError(f"quaternion norm {np.linalg.norm(q)} too far from 1")
        q = canonicalize_quat(q)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "quat", q)
        p.flags.writeable = False
        q.flags.writeable = False

    def compose(self, other: "Pose") -> "Pose":
        """self then other, i.e. world_from_b = world_from_a.compose(a_from_b)."""
        return Pose(
            self.position + self.rotation() @ other.position,
            quat_mul(self.quat, other.quat),
        )

    def inverse(self) -> "Pose":
        qi = quat_conj(self.quat)
        return Pose(-quat_rotate(qi, self.position), qi)

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return self.position + self.rotation() @ np.asarray(p, dtype=np.float64)

    def transform_points(self, pts: np.ndarray) -> np.ndarray:
        return self.position + np.asarray(pts, dtype=np.float64) @ self.rotation().T

    def rotation(self) -> np.ndarray:
        cached = self.__dict__.get("_rot")
        if cached is None:
            cached = quat_to_matrix(self.quat)
            object.__setattr__(self, "_rot", cached)
        return cached

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.quat])

    @staticmethod
    def from_array(a: np.ndarray) -> "Pose":
        a = np.asarray(a, dtype=np.float64)
        return Pose(a[:3], canonicalize_quat(a[3:7]))

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    def is_close(self, other: "Pose", pos_tol: float = 1e-9, ang_tol: float = 1e-9) -> bool:
        return (
            np.linalg.norm(self.position - other.position) <= pos_tol
            and quat_angle(self.quat, other.quat) <= ang_tol
        )


def look_at_quat(eye: np.ndarray, target: np.ndarray, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Orientation whose local +z axis points from eye toward target.

    Local +x is the image-right axis, chosen perpendicular to world up so
    rendered images stay upright.
    """
    eye = np.asarray(eye, dtype=np.float64)
    f = np.asarray(target, dtype=np.float64) - eye
    n = np.linalg.norm(f)
    if n < 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    f = f / n
    up = np.asarray(up, dtype=np.float64)
    r = np.cross(f, -up)
    rn = np.linalg.norm(r)
    if rn < 1e-9:
        # Looking straight along up: pick a fixed fallback right axis.
        r = np.array([1.0, 0.0, 0.0])
        r = r - f * np.dot(r, f)
        rn = np.linalg.norm(r)
    r = r / rn
    d = np.cross(f, r)  # image-down axis
    R = np.column_stack([r, d, f])
    return matrix_to_quat(R)
