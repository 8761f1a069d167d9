"""Residuals, information matrices, and analytic Jacobians for the
three constraint kinds: odometry, plane observation, and room center.

The room constraint ties a room's horizontal center to the midpoint
implied by its two wall pairs. Wall positions enter through the
signed coordinate s = -d * (n . u), which is unchanged when a plane is
stored with flipped orientation (n, d) -> (-n, -d); the constraint is
therefore exact for any combination of inward/outward wall normals.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import (
    Pose,
    plane_axes,
    skew,
    so3_right_jacobian_inverse,
)

PAIR_ANGLE_TOL_DEG = 10.0

RESIDUAL_DIMS = {"odometry": 6, "plane_obs": 4, "room": 2}

# Plausible relative trust between channels; the service and CLI expose
# the human weight as configuration.
DEFAULT_ODOMETRY_INFORMATION = np.diag([100.0, 100.0, 100.0, 400.0, 400.0, 400.0])
DEFAULT_PLANE_OBS_INFORMATION = np.diag([50.0, 50.0, 50.0, 100.0])
DEFAULT_ROOM_INFORMATION = np.eye(2)
DEFAULT_HUMAN_WEIGHT = 10.0


class FactorError(Exception):
    pass


@dataclass
class FactorNoise:
    """Information (inverse covariance) weight of one residual."""

    information: np.ndarray
    human_scale: float = 1.0

    def __post_init__(self):
        info = np.asarray(self.information, dtype=float)
        if info.ndim != 2 or info.shape[0] != info.shape[1]:
            raise FactorError("information matrix must be square")
        if not np.allclose(info, info.T):
            raise FactorError("information matrix must be symmetric")
        try:
            self._sqrt = np.linalg.cholesky(info).T  # also proves positive-definite
        except np.linalg.LinAlgError:
            raise FactorError("information matrix must be positive-definite")
        self.information = info

    def sqrt_information(self) -> np.ndarray:
        return self._sqrt


@dataclass
class Factor:
    kind: str  # odometry | plane_obs | room
    noise: FactorNoise
    # odometry
    keyframe_i: int | None = None
    keyframe_j: int | None = None
    measured: Pose | None = None
    # plane_obs
    keyframe_id: int | None = None
    plane_id: int | None = None
    observed_normal: np.ndarray | None = None
    observed_offset: float | None = None
    # room
    room_id: int | None = None
    plane_ids: tuple | None = None
    provenance: str | None = None
    # pairing fixed at creation: ((x_a, x_b), (y_a, y_b)); evaluation must
    # not re-derive it from drifting normals mid-optimization
    pairing: tuple | None = None

    def var_keys(self) -> list[tuple]:
        if self.kind == "odometry":
            return [("kf", self.keyframe_i), ("kf", self.keyframe_j)]
        if self.kind == "plane_obs":
            return [("kf", self.keyframe_id), ("plane", self.plane_id)]
        if self.kind == "room":
            return [("room", self.room_id)] + [("plane", p) for p in self.plane_ids]
        raise FactorError(f"unknown factor kind {self.kind!r}")


def odometry_factor(i: int, j: int, measured: Pose, information=None) -> Factor:
    info = DEFAULT_ODOMETRY_INFORMATION if information is None else information
    return Factor("odometry", FactorNoise(np.array(info, dtype=float)),
                  keyframe_i=i, keyframe_j=j, measured=measured)


def plane_obs_factor(keyframe_id: int, plane_id: int, observed_normal, observed_offset, information=None) -> Factor:
    info = DEFAULT_PLANE_OBS_INFORMATION if information is None else information
    n = np.asarray(observed_normal, dtype=float)
    return Factor("plane_obs", FactorNoise(np.array(info, dtype=float)),
                  keyframe_id=keyframe_id, plane_id=plane_id,
                  observed_normal=n / np.linalg.norm(n), observed_offset=float(observed_offset))


def room_factor(room_id: int, plane_ids, provenance: str = "auto", information=None,
                pairing=None) -> Factor:
    info = DEFAULT_ROOM_INFORMATION if information is None else information
    if pairing is not None:
        pairing = (tuple(pairing[0]), tuple(pairing[1]))
    return Factor("room", FactorNoise(np.array(info, dtype=float)),
                  room_id=room_id, plane_ids=tuple(plane_ids), provenance=provenance,
                  pairing=pairing)


def apply_human_weighting(factor: Factor, weight: float) -> Factor:
    """Scale a human room factor's information by the confidence weight.

    Applied exactly once, at creation.
    """
    if factor.kind != "room":
        raise FactorError(f"human weighting applies to room factors, not {factor.kind}")
    if factor.provenance != "human":
        raise FactorError("human weighting requires human provenance")
    if weight <= 1.0:
        raise FactorError(f"human weight must exceed 1, got {weight}")
    noise = FactorNoise(weight * factor.noise.information, human_scale=weight)
    return replace(factor, noise=noise)


# ----------------------------------------------------------------------
# residuals
# ----------------------------------------------------------------------


def plane_to_body(normal_w: np.ndarray, offset_w: float, pose: Pose) -> tuple[np.ndarray, float]:
    """Express a world plane in the body frame of a world-from-body pose."""
    R = pose.rotation_matrix()
    n_b = R.T @ np.asarray(normal_w, dtype=float)
    d_b = float(offset_w) + float(np.asarray(normal_w, dtype=float) @ pose.t)
    return n_b, d_b


def odometry_residual(pose_i: Pose, pose_j: Pose, measured: Pose) -> np.ndarray:
    """log(measured^-1 o pose_i^-1 o pose_j); zero iff the relative pose
    equals the measurement."""
    error = measured.inverse().compose(pose_i.inverse().compose(pose_j))
    return error.log()


def plane_obs_residual(pose: Pose, normal_w: np.ndarray, offset_w: float,
                       observed_normal: np.ndarray, observed_offset: float) -> np.ndarray:
    n_b, d_b = plane_to_body(normal_w, offset_w, pose)
    return np.concatenate([n_b - observed_normal, [d_b - observed_offset]])


def _axis3(axis2d: np.ndarray) -> np.ndarray:
    u = np.asarray(axis2d, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise FactorError("axis must be a unit 2-vector")
    return np.array([u[0], u[1], 0.0])


def room_center_from_pair(plane_a, plane_b, axis2d) -> np.ndarray:
    """Wall-pair midpoint along a horizontal axis, as a 2-vector.

    Positions use s = -d (n . u), so a flipped plane gives the same
    answer: for exact parallel walls the result is the midpoint
    regardless of whether normals were stored inward or outward.
    """
    u3 = _axis3(axis2d)
    cos_tol = np.cos(np.deg2rad(PAIR_ANGLE_TOL_DEG))
    for plane in (plane_a, plane_b):
        if abs(float(plane.normal @ u3)) < cos_tol:
            raise FactorError("axis-mismatch: plane normal not aligned with axis")
    if abs(float(plane_a.normal @ plane_b.normal)) < cos_tol:
        raise FactorError("not-anti-parallel: pair normals not parallel within tolerance")
    s_a = plane_a.signed_position(axis2d)
    s_b = plane_b.signed_position(axis2d)
    return 0.5 * (s_a + s_b) * np.asarray(axis2d, dtype=float)


def _split_pairs(planes) -> tuple[list, list]:
    xs = [p for p in planes if p.axis_class == "x"]
    ys = [p for p in planes if p.axis_class == "y"]
    if len(xs) != 2 or len(ys) != 2:
        raise FactorError(f"axis-mismatch: need 2 x-planes and 2 y-planes, got {len(xs)}/{len(ys)}")
    return xs, ys


def room_center_from_planes(planes) -> np.ndarray:
    """Plane-implied horizontal center v_x + v_y of a four-wall room."""
    xs, ys = _split_pairs(planes)
    v_x = room_center_from_pair(xs[0], xs[1], np.array([1.0, 0.0]))
    v_y = room_center_from_pair(ys[0], ys[1], np.array([0.0, 1.0]))
    return v_x + v_y


def room_residual(p_room: np.ndarray, planes) -> np.ndarray:
    """e = p_room - (v_x + v_y); zero iff p_room is the implied center."""
    return np.asarray(p_room, dtype=float) - room_center_from_planes(planes)


# ----------------------------------------------------------------------
# evaluation against a variable view
# ----------------------------------------------------------------------


@dataclass
class _PlaneView:
    """Minimal plane stand-in so residuals can run on raw (n, d) values."""

    normal: np.ndarray
    offset: float

    @property
    def axis_class(self) -> str:
        cos_tol = np.cos(np.deg2rad(PAIR_ANGLE_TOL_DEG))
        if abs(self.normal[0]) >= cos_tol:
            return "x"
        if abs(self.normal[1]) >= cos_tol:
            return "y"
        return "other"

    def signed_position(self, axis2d) -> float:
        u3 = _axis3(axis2d)
        return -self.offset * float(self.normal @ u3)


def evaluate(factor: Factor, variables: dict) -> np.ndarray:
    """Residual of a factor given {var_key: value} with values
    Pose for ("kf", i), (normal, offset) for ("plane", i), and a 2-vector
    for ("room", i)."""
    if factor.kind == "odometry":
        return odometry_residual(variables[("kf", factor.keyframe_i)],
                                 variables[("kf", factor.keyframe_j)], factor.measured)
    if factor.kind == "plane_obs":
        n, d = variables[("plane", factor.plane_id)]
        return plane_obs_residual(variables[("kf", factor.keyframe_id)], n, d,
                                  factor.observed_normal, factor.observed_offset)
    if factor.kind == "room":
        if factor.pairing is not None:
            return _paired_room_residual(factor, variables)
        planes = [_PlaneView(*variables[("plane", p)]) for p in factor.plane_ids]
        return room_residual(variables[("room", factor.room_id)], planes)
    raise FactorError(f"unknown factor kind {factor.kind!r}")


def _paired_room_residual(factor: Factor, variables: dict) -> np.ndarray:
    center = np.asarray(variables[("room", factor.room_id)], dtype=float)
    implied = np.zeros(2)
    for axis2d, pair in zip((np.array([1.0, 0.0]), np.array([0.0, 1.0])), factor.pairing):
        s = 0.0
        for pid in pair:
            n, d = variables[("plane", pid)]
            s += -d * (n[0] * axis2d[0] + n[1] * axis2d[1])
        implied += 0.5 * s * axis2d
    return center - implied


# ----------------------------------------------------------------------
# analytic Jacobians (same tangent conventions as optimizer.retract)
# ----------------------------------------------------------------------


def analytic_jacobians(factor: Factor, variables: dict) -> dict:
    """Jacobian blocks {var_key: matrix} at the given linearization point."""
    if factor.kind == "odometry":
        pose_i = variables[("kf", factor.keyframe_i)]
        pose_j = variables[("kf", factor.keyframe_j)]
        J_i, J_j = _odometry_jacobians(pose_i, pose_j, factor.measured)
        return {("kf", factor.keyframe_i): J_i, ("kf", factor.keyframe_j): J_j}
    if factor.kind == "plane_obs":
        pose = variables[("kf", factor.keyframe_id)]
        n_w, d_w = variables[("plane", factor.plane_id)]
        return _plane_obs_jacobians(factor, pose, n_w, d_w)
    if factor.kind == "room":
        return _room_jacobians(factor, variables)
    raise FactorError(f"unknown factor kind {factor.kind!r}")


def _odometry_jacobians(pose_i: Pose, pose_j: Pose, measured: Pose) -> tuple[np.ndarray, np.ndarray]:
    error = measured.inverse().compose(pose_i.inverse().compose(pose_j))
    r_rot = error.log()[:3]
    R_e = error.rotation_matrix()
    R_m_T = measured.rotation_matrix().T
    R_i_T = pose_i.rotation_matrix().T
    jr_inv = so3_right_jacobian_inverse(r_rot)
    jl_inv = jr_inv.T  # left Jacobian inverse via Jl(phi) = Jr(phi)^T

    J_j = np.zeros((6, 6))
    J_j[:3, :3] = jr_inv
    J_j[3:, 3:] = R_e

    v = R_i_T @ (pose_j.t - pose_i.t)
    J_i = np.zeros((6, 6))
    J_i[:3, :3] = -jl_inv @ R_m_T
    J_i[3:, :3] = R_m_T @ skew(v)
    J_i[3:, 3:] = -R_m_T

    return J_i, J_j


def _plane_obs_jacobians(factor: Factor, pose: Pose, n_w: np.ndarray, d_w: float) -> dict:
    R = pose.rotation_matrix()
    n_b = R.T @ n_w
    J_pose = np.zeros((4, 6))
    J_pose[:3, :3] = skew(n_b)
    J_pose[3, 3:] = n_b
    b1, b2 = plane_axes(n_w)
    J_plane = np.zeros((4, 3))
    J_plane[:3, 0] = R.T @ b1
    J_plane[:3, 1] = R.T @ b2
    J_plane[3, 0] = b1 @ pose.t
    J_plane[3, 1] = b2 @ pose.t
    J_plane[3, 2] = 1.0
    return {("kf", factor.keyframe_id): J_pose, ("plane", factor.plane_id): J_plane}


def _room_jacobians(factor: Factor, variables: dict) -> dict:
    planes = {p: _PlaneView(*variables[("plane", p)]) for p in factor.plane_ids}
    if factor.pairing is not None:
        xs, ys = list(factor.pairing[0]), list(factor.pairing[1])
    else:
        xs = [p for p in factor.plane_ids if planes[p].axis_class == "x"]
        ys = [p for p in factor.plane_ids if planes[p].axis_class == "y"]
        if len(xs) != 2 or len(ys) != 2:
            raise FactorError("axis-mismatch in room factor")
    out = {("room", factor.room_id): np.eye(2)}
    for axis2d, pair in ((np.array([1.0, 0.0]), xs), (np.array([0.0, 1.0]), ys)):
        u3 = _axis3(axis2d)
        for pid in pair:
            view = planes[pid]
            b1, b2 = plane_axes(view.normal)
            # e = p - sum of pair midpoints; s = -d (n.u)
            J = np.zeros((2, 3))
            J[:, 0] = 0.5 * view.offset * float(b1 @ u3) * axis2d
            J[:, 1] = 0.5 * view.offset * float(b2 @ u3) * axis2d
            J[:, 2] = 0.5 * float(view.normal @ u3) * axis2d
            out[("plane", pid)] = out.get(("plane", pid), np.zeros((2, 3))) + J
    return out
