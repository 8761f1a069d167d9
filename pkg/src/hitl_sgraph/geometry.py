"""Rigid-body transforms and rotation helpers.

Poses are stored as a unit quaternion (w, x, y, z) plus a translation
vector, world-from-body. The 6-dof tangent used by the optimizer is
ordered [rotation(3), translation(3)]; its exp/log pair is the direct
product SO(3) x R^3 (rotation-vector for the rotation block, raw
translation for the translation block), which is self-consistent:
exp(log(T)) == T exactly.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-12


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Unit-normalize; already-unit inputs pass through bit-exact so that
    serialize/deserialize round-trips do not perturb stored poses."""
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < _EPS:
        raise ValueError("cannot normalize a zero quaternion")
    if abs(n - 1.0) < 1e-12:
        return q.copy()
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product, both quaternions (w, x, y, z)."""
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


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def _cross3(a, b) -> np.ndarray:
    # np.cross has high per-call overhead; this path is hot
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by unit quaternion q."""
    w = q[0]
    u = q[1:]
    # v' = v + 2w (u x v) + 2 u x (u x v)
    uv = _cross3(u, v)
    return v + 2.0 * w * uv + 2.0 * _cross3(u, uv)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_rotvec(rv: np.ndarray) -> np.ndarray:
    """Unit quaternion for a rotation vector (axis * angle)."""
    rv = np.asarray(rv, dtype=float)
    angle = np.linalg.norm(rv)
    if angle < 1e-10:
        # second-order small-angle expansion keeps exp/log consistent
        half = 0.5 * rv
        q = np.concatenate(([1.0 - 0.5 * (half @ half)], half))
        return quat_normalize(q)
    axis = rv / angle
    return np.concatenate(([np.cos(angle / 2)], np.sin(angle / 2) * axis))


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle, angle in [0, pi]) of a unit quaternion."""
    q = quat_normalize(q)
    if q[0] < 0.0:
        q = -q
    sin_half = np.linalg.norm(q[1:])
    if sin_half < 1e-10:
        return 2.0 * q[1:]  # small-angle: q ~ (1, rv/2)
    angle = 2.0 * np.arctan2(sin_half, q[0])
    return (angle / sin_half) * q[1:]


def quat_from_yaw(yaw: float) -> np.ndarray:
    return np.array([np.cos(yaw / 2), 0.0, 0.0, np.sin(yaw / 2)])


def skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def so3_right_jacobian_inverse(rv: np.ndarray) -> np.ndarray:
    """Inverse right Jacobian of SO(3) at rotation vector rv.

    Satisfies Log(Exp(rv) Exp(d)) ~ rv + Jr_inv(rv) d for small d.
    """
    theta = np.linalg.norm(rv)
    W = skew(rv)
    if theta < 1e-6:
        return np.eye(3) + 0.5 * W + (1.0 / 12.0) * (W @ W)
    coeff = 1.0 / theta**2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) + 0.5 * W + coeff * (W @ W)


class Pose:
    """World-from-body rigid transform (unit quaternion + translation).

    Treated as immutable; the rotation matrix is cached on first use.
    """

    __slots__ = ("q", "t", "_R")

    def __init__(self, q=(1.0, 0.0, 0.0, 0.0), t=(0.0, 0.0, 0.0)):
        self.q = quat_normalize(np.asarray(q, dtype=float))
        self.t = np.asarray(t, dtype=float).copy()
        self._R = None

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_xy_yaw(x: float, y: float, yaw: float, z: float = 0.0) -> "Pose":
        return Pose(quat_from_yaw(yaw), (x, y, z))

    def rotation_matrix(self) -> np.ndarray:
        if self._R is None:
            self._R = quat_to_matrix(self.q)
        return self._R

    def compose(self, other: "Pose") -> "Pose":
        return Pose(
            quat_multiply(self.q, other.q),
            quat_rotate(self.q, other.t) + self.t,
        )

    def inverse(self) -> "Pose":
        qi = quat_conjugate(self.q)
        return Pose(qi, -quat_rotate(qi, self.t))

    def transform(self, p: np.ndarray) -> np.ndarray:
        """Map a body-frame point into the world frame."""
        return quat_rotate(self.q, np.asarray(p, dtype=float)) + self.t

    def log(self) -> np.ndarray:
        """6-vector [rotvec, translation] with exp(log(T)) == T."""
        return np.concatenate([quat_to_rotvec(self.q), self.t])

    @staticmethod
    def exp(delta: np.ndarray) -> "Pose":
        delta = np.asarray(delta, dtype=float)
        if delta.shape != (6,):
            raise ValueError(f"pose tangent must be 6-dim, got {delta.shape}")
        return Pose(quat_from_rotvec(delta[:3]), delta[3:])

    def retract(self, delta: np.ndarray) -> "Pose":
        """Right-multiply by exp(delta); the quaternion is renormalized."""
        return self.compose(Pose.exp(delta))

    def almost_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        dq = min(np.linalg.norm(self.q - other.q), np.linalg.norm(self.q + other.q))
        return dq < tol and np.linalg.norm(self.t - other.t) < tol

    def to_list(self) -> list:
        return [float(v) for v in np.concatenate([self.q, self.t])]

    @staticmethod
    def from_list(values) -> "Pose":
        values = list(values)
        return Pose(values[:4], values[4:7])

    def __repr__(self) -> str:
        return f"Pose(q={np.round(self.q, 6).tolist()}, t={np.round(self.t, 6).tolist()})"


def yaw_of(pose: Pose) -> float:
    """Heading of the body x-axis in the world xy-plane."""
    fwd = quat_rotate(pose.q, np.array([1.0, 0.0, 0.0]))
    return float(np.arctan2(fwd[1], fwd[0]))


def plane_axes(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal in-plane axes (u, v) for a unit normal.

    Also serves as the tangent basis for the unit-normal retraction, so
    extent math and plane optimization share one convention.
    """
    n = np.asarray(normal, dtype=float)
    if abs(n[2]) < 0.9:
        u = np.array([-n[1], n[0], 0.0])  # z x n: horizontal along the wall
    else:
        u = np.array([0.0, n[2], -n[1]])  # x x n
    u = u / np.linalg.norm(u)
    v = _cross3(n, u)
    return u, v


def sphere_retract(n: np.ndarray, delta2: np.ndarray) -> np.ndarray:
    """Exponential-map step on the unit sphere along the tangent basis.

    A zero step returns the input bit-for-bit (retract(v, 0) == v).
    """
    n = np.asarray(n, dtype=float)
    if delta2[0] == 0.0 and delta2[1] == 0.0:
        return n.copy()
    b1, b2 = plane_axes(n)
    step = delta2[0] * b1 + delta2[1] * b2
    angle = np.linalg.norm(step)
    if angle < 1e-12:
        out = n + step
    else:
        out = np.cos(angle) * n + np.sin(angle) * (step / angle)
    return out / np.linalg.norm(out)
