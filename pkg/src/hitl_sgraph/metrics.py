"""Evaluation: absolute trajectory error, map surface RMSE, and room
detection precision/recall/F1 against ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Pose, plane_axes

ASSOCIATION_MAX_DT = 0.010  # seconds


class MetricsError(Exception):
    pass


@dataclass
class RoomMatchConfig:
    center_threshold: float = 0.5  # meters; one-to-one greedy matching

    def __post_init__(self):
        if self.center_threshold <= 0:
            raise MetricsError("center threshold must be positive")


# ----------------------------------------------------------------------
# trajectories
# ----------------------------------------------------------------------


def write_tum(path, trajectory: list[tuple[float, Pose]]):
    """One `timestamp tx ty tz qx qy qz qw` record per line, 9 significant digits."""
    with open(path, "w") as fh:
        for stamp, pose in trajectory:
            w, x, y, z = pose.q
            tx, ty, tz = pose.t
            fields = [stamp, tx, ty, tz, x, y, z, w]
            fh.write(" ".join(f"{v:.9g}" for v in fields) + "\n")


def read_tum(path) -> list[tuple[float, Pose]]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise MetricsError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
            stamp, tx, ty, tz, qx, qy, qz, qw = (float(v) for v in parts)
            out.append((stamp, Pose((qw, qx, qy, qz), (tx, ty, tz))))
    return out


def _associate(est, gt, max_dt: float):
    """Greedy one-to-one nearest-stamp pairing within max_dt."""
    pairs = []
    for i, (ts, _) in enumerate(est):
        for j, (tg, _) in enumerate(gt):
            dt = abs(ts - tg)
            if dt <= max_dt:
                pairs.append((dt, i, j))
    pairs.sort()
    used_i, used_j, matches = set(), set(), []
    for _, i, j in pairs:
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        matches.append((i, j))
    matches.sort()
    return matches


def umeyama_alignment(source: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rigid (R, t), no scale, minimizing ||R s + t - g||^2 (Nx3 inputs)."""
    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    cov = (target - mu_t).T @ (source - mu_s) / source.shape[0]
    U, _, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    t = mu_t - R @ mu_s
    return R, t


def ate(estimate: list[tuple[float, Pose]], ground_truth: list[tuple[float, Pose]],
        align: bool = True, max_dt: float = ASSOCIATION_MAX_DT) -> float:
    """RMSE of translational differences over stamp-associated pose pairs,
    after optimal rigid alignment when align is set."""
    matches = _associate(estimate, ground_truth, max_dt)
    if len(matches) < 2:
        raise MetricsError(f"need at least 2 associated timestamps, found {len(matches)}")
    est = np.array([estimate[i][1].t for i, _ in matches])
    gt = np.array([ground_truth[j][1].t for _, j in matches])
    if align:
        R, t = umeyama_alignment(est, gt)
        est = est @ R.T + t
    residual = est - gt
    return float(np.sqrt(np.mean(np.sum(residual * residual, axis=1))))


# ----------------------------------------------------------------------
# map surfaces
# ----------------------------------------------------------------------


def _rect_distances(points: np.ndarray, normal: np.ndarray, center: np.ndarray,
                    half_u: float, half_v: float) -> np.ndarray:
    u, v = plane_axes(normal)
    rel = points - center
    dn = rel @ normal
    du = np.maximum(0.0, np.abs(rel @ u) - half_u)
    dv = np.maximum(0.0, np.abs(rel @ v) - half_v)
    return np.sqrt(dn * dn + du * du + dv * dv)


def map_rmse(estimated_planes, ground_truth_planes, spacing: float = 0.1) -> float:
    """RMSE of sampled estimated-surface points to the nearest ground-truth
    surface (point-to-rectangle distance)."""
    if not estimated_planes or not ground_truth_planes:
        raise MetricsError("need non-empty estimated and ground-truth plane sets")
    samples = np.vstack([p.sample_points(spacing) for p in estimated_planes])
    best = np.full(samples.shape[0], np.inf)
    for gt in ground_truth_planes:
        d = _rect_distances(samples, np.asarray(gt.normal, dtype=float),
                            np.asarray(gt.extent.center, dtype=float),
                            float(gt.extent.half_u), float(gt.extent.half_v))
        best = np.minimum(best, d)
    return float(np.sqrt(np.mean(best * best)))


# ----------------------------------------------------------------------
# rooms
# ----------------------------------------------------------------------


def room_prf(detected_centers, ground_truth_centers, config: RoomMatchConfig | None = None) -> dict:
    """Precision/recall/F1 under greedy one-to-one center matching.

    Conventions: precision is 1 with no detections, recall is 1 with no
    ground-truth rooms, F1 is 0 when precision + recall is 0.
    """
    config = config or RoomMatchConfig()
    det = [np.asarray(c, dtype=float) for c in detected_centers]
    gt = [np.asarray(c, dtype=float) for c in ground_truth_centers]
    pairs = []
    for i, d in enumerate(det):
        for j, g in enumerate(gt):
            dist = float(np.linalg.norm(d - g))
            if dist <= config.center_threshold:
                pairs.append((dist, i, j))
    pairs.sort()
    used_d, used_g = set(), set()
    tp = 0
    for _, i, j in pairs:
        if i in used_d or j in used_g:
            continue
        used_d.add(i)
        used_g.add(j)
        tp += 1
    fp = len(det) - tp
    fn = len(gt) - tp
    precision = 1.0 if (tp + fp) == 0 else tp / (tp + fp)
    recall = 1.0 if (tp + fn) == 0 else tp / (tp + fn)
    f1 = 0.0 if (precision + recall) == 0 else 2 * precision * recall / (precision + recall)
    return {"precision": precision, "recall": recall, "f1": f1, "tp": tp, "fp": fp, "fn": fn}
