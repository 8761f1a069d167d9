"""Baseline room detection from the current plane set, plus candidate
validation shared by the automatic path and human room commands.

The detector is deliberately recall-limited: it only assembles rooms
from wall pairs whose normals face each other (each wall observed from
inside the room). A human command may instead pick any anti-parallel
faces, e.g. the far side of a shared wall seen from the neighboring
room, which is exactly how occluded rooms get repaired; the flip-
invariant center math makes such a selection land on the same center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AXIS2_X = np.array([1.0, 0.0])
AXIS2_Y = np.array([0.0, 1.0])
AXIS3 = {"x": np.array([1.0, 0.0, 0.0]), "y": np.array([0.0, 1.0, 0.0])}


@dataclass
class DetectorConfig:
    width_min: float = 1.5
    width_max: float = 10.0
    angle_tol_deg: float = 10.0
    overlap_min: float = 0.5  # fraction of the other axis's span
    duplicate_center_threshold: float = 1.0

    def __post_init__(self):
        if not 0 < self.width_min < self.width_max:
            raise ValueError("need 0 < width_min < width_max")
        if not 0 < self.angle_tol_deg < 45:
            raise ValueError("angle tolerance must be in (0, 45) degrees")


@dataclass
class RoomCandidate:
    plane_ids: tuple[int, int, int, int]
    center: np.ndarray

    def sort_key(self):
        ids = tuple(sorted(self.plane_ids))
        return (ids[0], ids)


def _pair_checks(pair, axis: str, config: DetectorConfig) -> str | None:
    a, b = pair
    cos_tol = np.cos(np.deg2rad(config.angle_tol_deg))
    if float(a.normal @ b.normal) > -cos_tol:
        return "not-anti-parallel"
    u2 = AXIS2_X if axis == "x" else AXIS2_Y
    width = abs(a.signed_position(u2) - b.signed_position(u2))
    if not config.width_min <= width <= config.width_max:
        return "width-out-of-range"
    return None


def _overlap_checks(xs, ys, config: DetectorConfig) -> str | None:
    spans = {}
    for axis, pair in (("x", xs), ("y", ys)):
        u2 = AXIS2_X if axis == "x" else AXIS2_Y
        s = sorted(p.signed_position(u2) for p in pair)
        spans[axis] = (s[0], s[1])
    # each pair's extents must cover enough of the other axis's span
    for pair, other_axis in ((xs, "y"), (ys, "x")):
        lo, hi = spans[other_axis]
        span_len = hi - lo
        for plane in pair:
            e_lo, e_hi = plane.extent_interval(AXIS3[other_axis])
            overlap = min(hi, e_hi) - max(lo, e_lo)
            if overlap / span_len < config.overlap_min:
                return "no-overlap"
    return None


def validate_candidate(plane_ids, graph, config: DetectorConfig | None = None) -> str | None:
    """None when the four planes form a valid room; otherwise the name of
    the first violated rule."""
    config = config or DetectorConfig()
    ids = tuple(plane_ids)
    if len(ids) != 4 or len(set(ids)) != 4:
        return "not-4-distinct"
    for pid in ids:
        if pid not in graph.planes:
            return "unknown-plane"
    planes = [graph.planes[p] for p in ids]
    xs = [p for p in planes if p.axis_class == "x"]
    ys = [p for p in planes if p.axis_class == "y"]
    if len(xs) != 2 or len(ys) != 2:
        return "axis-mismatch"
    for pair, axis in ((xs, "x"), (ys, "y")):
        violation = _pair_checks(pair, axis, config)
        if violation:
            return violation
    return _overlap_checks(xs, ys, config)


def _inward_pairs(planes, axis: str) -> list[tuple]:
    """Unordered plane pairs whose normals face each other along the axis."""
    u2 = AXIS2_X if axis == "x" else AXIS2_Y
    u3 = AXIS3[axis]
    out = []
    for i, a in enumerate(planes):
        for b in planes[i + 1:]:
            lo, hi = sorted((a, b), key=lambda p: p.signed_position(u2))
            if float(lo.normal @ u3) > 0 > float(hi.normal @ u3):
                out.append((a, b))
    return out


def detect_rooms(graph, config: DetectorConfig | None = None) -> list[RoomCandidate]:
    """Enumerate inward-facing wall quadruples, validate, de-duplicate.

    Candidates within the duplicate threshold of an existing room
    (human rooms included) or of an earlier candidate are suppressed.
    Output is ordered by ascending minimum plane id.
    """
    from . import factors

    config = config or DetectorConfig()
    planes = list(graph.planes.values())
    xs = [p for p in planes if p.axis_class == "x"]
    ys = [p for p in planes if p.axis_class == "y"]
    candidates = []
    for xa, xb in _inward_pairs(xs, "x"):
        for ya, yb in _inward_pairs(ys, "y"):
            ids = (xa.id, xb.id, ya.id, yb.id)
            if validate_candidate(ids, graph, config) is not None:
                continue
            center = factors.room_center_from_planes([xa, xb, ya, yb])
            candidates.append(RoomCandidate(ids, center))
    candidates.sort(key=RoomCandidate.sort_key)
    existing = [room.center for room in graph.rooms.values()]
    kept: list[RoomCandidate] = []
    for cand in candidates:
        near = [c for c in existing + [k.center for k in kept]
                if np.linalg.norm(c - cand.center) < config.duplicate_center_threshold]
        if not near:
            kept.append(cand)
    return kept
