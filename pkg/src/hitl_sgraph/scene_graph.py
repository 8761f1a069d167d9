"""Hierarchical scene graph: keyframes, planes, rooms, floors.

All mutations go through a single writer (guarded by a lock), bump a
monotone revision counter, and queue a delta carrying full entity
values, so that any snapshot plus the deltas after it reproduces a
later snapshot exactly.
"""

from __future__ import annotations

import copy
import threading
from dataclasses import dataclass, field

import numpy as np

from . import factors
from .geometry import Pose, plane_axes

# Dominant-axis / association / anti-parallel angular tolerance (degrees).
AXIS_ANGLE_TOL_DEG = 10.0
# Planes closer than this along their common normal direction are the
# same landmark (meters).
ASSOC_OFFSET_TOL = 0.3

class SceneGraphError(Exception):
    pass


class RoomValidationError(SceneGraphError):
    """Room candidate rejected; .violation holds the rule name."""

    def __init__(self, violation: str, detail: str = ""):
        self.violation = violation
        super().__init__(f"{violation}: {detail}" if detail else violation)


@dataclass
class PlaneExtent:
    """Rectangle on the plane: center plus two in-plane half-lengths."""

    center: np.ndarray
    half_u: float
    half_v: float

    def to_dict(self) -> dict:
        return {
            "center": [float(c) for c in self.center],
            "half_u": float(self.half_u),
            "half_v": float(self.half_v),
        }

    @staticmethod
    def from_dict(d: dict) -> "PlaneExtent":
        return PlaneExtent(np.array(d["center"], dtype=float), d["half_u"], d["half_v"])


_COS_AXIS_TOL = np.cos(np.deg2rad(AXIS_ANGLE_TOL_DEG))


@dataclass
class Plane:
    """Infinite plane n.p + d = 0 (unit n) with a rectangular extent."""

    id: int
    normal: np.ndarray
    offset: float
    extent: PlaneExtent
    provenance: str = "observed"  # observed | ground_truth

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=float)
        n = np.linalg.norm(self.normal)
        if abs(n - 1.0) > 1e-6:
            self.normal = self.normal / n
        # keep the extent center on the plane; skip when already there so
        # that serialize/deserialize round-trips are bit-exact
        c = np.asarray(self.extent.center, dtype=float)
        err = float(self.normal @ c + self.offset)
        if abs(err) > 1e-12:
            self.extent.center = c - err * self.normal
        else:
            self.extent.center = c
        self._invalidate_caches()

    def _invalidate_caches(self):
        """Call after mutating the normal in place."""
        self._axis_class = None
        self._axes = None

    @property
    def axis_class(self) -> str:
        if self._axis_class is None:
            if abs(self.normal[0]) >= _COS_AXIS_TOL:
                self._axis_class = "x"
            elif abs(self.normal[1]) >= _COS_AXIS_TOL:
                self._axis_class = "y"
            else:
                self._axis_class = "other"
        return self._axis_class

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        if self._axes is None:
            self._axes = plane_axes(self.normal)
        return self._axes

    def signed_position(self, axis2d) -> float:
        """Position along a horizontal unit axis; flip-invariant."""
        return -self.offset * (self.normal[0] * axis2d[0] + self.normal[1] * axis2d[1])

    def extent_interval(self, axis3d: np.ndarray) -> tuple[float, float]:
        """Projection of the extent rectangle onto a world axis."""
        u, v = self.axes()
        c = float(self.extent.center @ axis3d)
        r = abs(float(u @ axis3d)) * self.extent.half_u + abs(float(v @ axis3d)) * self.extent.half_v
        return c - r, c + r

    def sample_points(self, spacing: float) -> np.ndarray:
        """Grid of points covering the extent (always includes corners)."""
        u, v = self.axes()
        nu = max(2, int(np.ceil(2 * self.extent.half_u / spacing)) + 1)
        nv = max(2, int(np.ceil(2 * self.extent.half_v / spacing)) + 1)
        su = np.linspace(-self.extent.half_u, self.extent.half_u, nu)
        sv = np.linspace(-self.extent.half_v, self.extent.half_v, nv)
        gu, gv = np.meshgrid(su, sv)
        return self.extent.center + gu.reshape(-1, 1) * u + gv.reshape(-1, 1) * v

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "normal": [float(x) for x in self.normal],
            "offset": float(self.offset),
            "extent": self.extent.to_dict(),
            "provenance": self.provenance,
            "axis_class": self.axis_class,
        }

    @staticmethod
    def from_dict(d: dict) -> "Plane":
        return Plane(
            id=d["id"],
            normal=np.array(d["normal"], dtype=float),
            offset=float(d["offset"]),
            extent=PlaneExtent.from_dict(d["extent"]),
            provenance=d.get("provenance", "observed"),
        )


@dataclass
class Keyframe:
    id: int
    pose: Pose
    stamp: float
    observed_plane_ids: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "pose": self.pose.to_list(),
            "stamp": float(self.stamp),
            "observed_plane_ids": list(self.observed_plane_ids),
        }

    @staticmethod
    def from_dict(d: dict) -> "Keyframe":
        return Keyframe(d["id"], Pose.from_list(d["pose"]), d["stamp"], list(d["observed_plane_ids"]))


@dataclass
class Room:
    id: int
    center: np.ndarray  # horizontal (x, y)
    plane_ids: tuple[int, int, int, int]
    provenance: str  # auto | human
    floor_id: int = 0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "center": [float(self.center[0]), float(self.center[1])],
            "plane_ids": list(self.plane_ids),
            "provenance": self.provenance,
            "floor_id": self.floor_id,
        }

    @staticmethod
    def from_dict(d: dict) -> "Room":
        return Room(d["id"], np.array(d["center"], dtype=float), tuple(d["plane_ids"]), d["provenance"], d["floor_id"])


@dataclass
class Floor:
    id: int
    room_ids: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"id": self.id, "room_ids": list(self.room_ids)}

    @staticmethod
    def from_dict(d: dict) -> "Floor":
        return Floor(d["id"], list(d["room_ids"]))


@dataclass
class PlaneObservation:
    """A plane seen from a keyframe, in the body frame."""

    normal: np.ndarray
    offset: float
    extent_center: np.ndarray  # body frame
    half_u: float
    half_v: float
    gt_key: str | None = None  # simulator bookkeeping only


@dataclass
class DeltaEvent:
    kind: str  # keyframe | plane | room | floor
    op: str  # upsert | remove
    data: dict

    def to_dict(self) -> dict:
        return {"kind": self.kind, "op": self.op, "data": self.data}

    @staticmethod
    def from_dict(d: dict) -> "DeltaEvent":
        return DeltaEvent(d["kind"], d["op"], d["data"])


@dataclass
class Delta:
    revision: int
    events: list[DeltaEvent]

    def to_dict(self) -> dict:
        return {"revision": self.revision, "events": [e.to_dict() for e in self.events]}

    @staticmethod
    def from_dict(d: dict) -> "Delta":
        return Delta(d["revision"], [DeltaEvent.from_dict(e) for e in d["events"]])


class GraphSnapshot:
    """Immutable by-value copy of the graph at one revision."""

    def __init__(self, revision: int, keyframes, planes, rooms, floors):
        self.revision = revision
        self.keyframes = {k.id: k for k in keyframes}
        self.planes = {p.id: p for p in planes}
        self.rooms = {r.id: r for r in rooms}
        self.floors = {f.id: f for f in floors}

    def to_dict(self) -> dict:
        return {
            "revision": self.revision,
            "keyframes": [self.keyframes[i].to_dict() for i in sorted(self.keyframes)],
            "planes": [self.planes[i].to_dict() for i in sorted(self.planes)],
            "rooms": [self.rooms[i].to_dict() for i in sorted(self.rooms)],
            "floors": [self.floors[i].to_dict() for i in sorted(self.floors)],
        }

    @staticmethod
    def from_dict(d: dict) -> "GraphSnapshot":
        return GraphSnapshot(
            d["revision"],
            [Keyframe.from_dict(k) for k in d["keyframes"]],
            [Plane.from_dict(p) for p in d["planes"]],
            [Room.from_dict(r) for r in d["rooms"]],
            [Floor.from_dict(f) for f in d["floors"]],
        )


def apply_deltas(snapshot: GraphSnapshot, deltas: list[Delta]) -> GraphSnapshot:
    """Replay deltas (must start right after snapshot.revision, in order)."""
    state = GraphSnapshot.from_dict(snapshot.to_dict())
    tables = {"keyframe": state.keyframes, "plane": state.planes, "room": state.rooms, "floor": state.floors}
    parsers = {"keyframe": Keyframe.from_dict, "plane": Plane.from_dict, "room": Room.from_dict, "floor": Floor.from_dict}
    rev = state.revision
    for delta in deltas:
        if delta.revision != rev + 1:
            raise SceneGraphError(f"delta revision {delta.revision} does not follow {rev}")
        for ev in delta.events:
            table = tables[ev.kind]
            if ev.op == "upsert":
                entity = parsers[ev.kind](ev.data)
                table[entity.id] = entity
            elif ev.op == "remove":
                table.pop(ev.data["id"], None)
            else:
                raise SceneGraphError(f"unknown delta op {ev.op!r}")
        rev = delta.revision
    state.revision = rev
    return state


class SceneGraph:
    """Single-writer scene graph with snapshot/delta extraction.

    Also owns the factor list: add_keyframe registers odometry and
    plane-observation factors, add_room registers the room factor with
    the provenance-appropriate information weighting.
    """

    def __init__(self, human_weight: float = factors.DEFAULT_HUMAN_WEIGHT):
        self._lock = threading.Lock()
        self.revision = 0
        self.keyframes: dict[int, Keyframe] = {}
        self.planes: dict[int, Plane] = {}
        self.rooms: dict[int, Room] = {}
        self.floors: dict[int, Floor] = {0: Floor(0)}
        self.factors: list[factors.Factor] = []
        self.human_weight = float(human_weight)
        self._deltas: list[Delta] = []
        self._next_ids = {"keyframe": 0, "plane": 0, "room": 0}

    # ------------------------------------------------------------------
    # mutations
    # ------------------------------------------------------------------

    def add_keyframe(self, pose: Pose, stamp: float, observed: list[PlaneObservation] | None = None) -> int:
        """Insert a keyframe; associates observations to plane landmarks.

        The odometry measurement is derived once, at insertion, from the
        previous stored pose, so later optimization of stored poses does
        not alter it.
        """
        observed = observed or []
        with self._lock:
            if self.keyframes:
                last = self.keyframes[max(self.keyframes)]
                if stamp <= last.stamp:
                    raise SceneGraphError(f"non-monotone stamp {stamp} after {last.stamp}")
            kf_id = self._next_ids["keyframe"]
            kf = Keyframe(kf_id, pose, stamp)
            events = []
            for obs in observed:
                plane_id, created = self._associate(pose, obs)
                kf.observed_plane_ids.append(plane_id)
                events.append(DeltaEvent("plane", "upsert", self.planes[plane_id].to_dict()))
                self.factors.append(
                    factors.plane_obs_factor(kf_id, plane_id, np.asarray(obs.normal, float), float(obs.offset))
                )
            if kf_id > 0:
                prev = self.keyframes[kf_id - 1]
                measured = prev.pose.inverse().compose(pose)
                self.factors.append(factors.odometry_factor(kf_id - 1, kf_id, measured))
            self.keyframes[kf_id] = kf
            self._next_ids["keyframe"] += 1
            events.insert(0, DeltaEvent("keyframe", "upsert", kf.to_dict()))
            self._commit(events)
            return kf_id

    def _associate(self, pose: Pose, obs: PlaneObservation) -> tuple[int, bool]:
        """Match an observation to an existing landmark or register a new one.

        Gate: normals within the angular tolerance and signed plane
        positions within ASSOC_OFFSET_TOL. Positions are compared at the
        observing keyframe (n.t + d), not at the world origin, so the
        gate does not degrade with distance from the origin.
        """
        R = pose.rotation_matrix()
        n_w = R @ np.asarray(obs.normal, dtype=float)
        n_w = n_w / np.linalg.norm(n_w)
        d_w = float(obs.offset) - float(n_w @ pose.t)
        center_w = pose.transform(obs.extent_center)
        cos_tol = np.cos(np.deg2rad(AXIS_ANGLE_TOL_DEG))
        here = float(n_w @ pose.t) + d_w
        best, best_diff = None, ASSOC_OFFSET_TOL
        for plane in self.planes.values():
            if float(plane.normal @ n_w) < cos_tol:
                continue
            diff = abs(float(plane.normal @ pose.t) + plane.offset - here)
            if diff < best_diff:
                best, best_diff = plane, diff
        if best is not None:
            self._expand_extent(best, center_w, obs.half_u, obs.half_v, n_w)
            return best.id, False
        plane_id = self._next_ids["plane"]
        self._next_ids["plane"] += 1
        plane = Plane(plane_id, n_w, d_w, PlaneExtent(center_w, obs.half_u, obs.half_v))
        self.planes[plane_id] = plane
        return plane_id, True

    def _expand_extent(self, plane: Plane, center_w: np.ndarray, half_u: float, half_v: float, n_obs: np.ndarray):
        """Grow the landmark extent to cover a newly observed rectangle."""
        u, v = plane_axes(plane.normal)
        uo, vo = plane_axes(n_obs)
        corners = [plane.extent.center + su * plane.extent.half_u * u + sv * plane.extent.half_v * v
                   for su in (-1, 1) for sv in (-1, 1)]
        corners += [center_w + su * half_u * uo + sv * half_v * vo for su in (-1, 1) for sv in (-1, 1)]
        cu = np.array([(c - plane.extent.center) @ u for c in corners])
        cv = np.array([(c - plane.extent.center) @ v for c in corners])
        mid_u, mid_v = (cu.min() + cu.max()) / 2, (cv.min() + cv.max()) / 2
        plane.extent.center = plane.extent.center + mid_u * u + mid_v * v
        plane.extent.half_u = float((cu.max() - cu.min()) / 2)
        plane.extent.half_v = float((cv.max() - cv.min()) / 2)

    def add_room(self, plane_ids, provenance: str, center=None, floor_id: int = 0) -> int:
        """Create a room from four planes; registers its factor.

        The center defaults to the plane-implied geometric center; a
        caller-supplied center is trusted as-is.
        """
        from . import room_detect  # deferred: room_detect imports this module

        plane_ids = tuple(int(p) for p in plane_ids)
        with self._lock:
            verdict = room_detect.validate_candidate(plane_ids, self)
            if verdict is not None:
                raise RoomValidationError(verdict)
            if provenance not in ("auto", "human"):
                raise SceneGraphError(f"unknown provenance {provenance!r}")
            planes = [self.planes[p] for p in plane_ids]
            dup = self._duplicate_of(planes, center)
            if dup is not None:
                raise RoomValidationError("duplicate-room", f"existing room {dup}")
            if center is None:
                center = factors.room_center_from_planes(planes)
            room_id = self._next_ids["room"]
            self._next_ids["room"] += 1
            room = Room(room_id, np.asarray(center, dtype=float), plane_ids, provenance, floor_id)
            self.rooms[room_id] = room
            floor = self.floors[floor_id]
            floor.room_ids.append(room_id)
            pairing = (tuple(p.id for p in planes if p.axis_class == "x"),
                       tuple(p.id for p in planes if p.axis_class == "y"))
            factor = factors.room_factor(room_id, plane_ids, provenance, pairing=pairing)
            if provenance == "human":
                factor = factors.apply_human_weighting(factor, self.human_weight)
            self.factors.append(factor)
            self._commit([
                DeltaEvent("room", "upsert", room.to_dict()),
                DeltaEvent("floor", "upsert", floor.to_dict()),
            ])
            return room_id

    def _duplicate_of(self, planes, center) -> int | None:
        from .room_detect import DetectorConfig

        c = np.asarray(center, dtype=float) if center is not None else factors.room_center_from_planes(planes)
        thr = DetectorConfig().duplicate_center_threshold
        for room in self.rooms.values():
            if np.linalg.norm(room.center - c) < thr:
                return room.id
        return None

    def remove_room(self, room_id: int, force: bool = False):
        """Drop a room and its factor. Human rooms require force=True."""
        with self._lock:
            room = self.rooms.get(room_id)
            if room is None:
                raise SceneGraphError(f"no room {room_id}")
            if room.provenance == "human" and not force:
                raise SceneGraphError("human rooms are not removed automatically")
            del self.rooms[room_id]
            floor = self.floors[room.floor_id]
            floor.room_ids.remove(room_id)
            self.factors = [f for f in self.factors
                            if not (f.kind == "room" and f.room_id == room_id)]
            self._commit([
                DeltaEvent("room", "remove", {"id": room_id}),
                DeltaEvent("floor", "upsert", floor.to_dict()),
            ])

    def apply_optimized_values(self, poses: dict[int, Pose], planes: dict[int, tuple], rooms: dict[int, np.ndarray]):
        """Write back optimizer results as a single revision."""
        with self._lock:
            events = []
            for kf_id, pose in poses.items():
                self.keyframes[kf_id].pose = pose
                events.append(DeltaEvent("keyframe", "upsert", self.keyframes[kf_id].to_dict()))
            for plane_id, (n, d) in planes.items():
                plane = self.planes[plane_id]
                plane.normal = np.asarray(n, dtype=float)
                plane.offset = float(d)
                plane._invalidate_caches()
                c = plane.extent.center
                plane.extent.center = c - (plane.normal @ c + plane.offset) * plane.normal
                events.append(DeltaEvent("plane", "upsert", plane.to_dict()))
            for room_id, center in rooms.items():
                self.rooms[room_id].center = np.asarray(center, dtype=float)
                events.append(DeltaEvent("room", "upsert", self.rooms[room_id].to_dict()))
            if events:
                self._commit(events)

    def _commit(self, events: list[DeltaEvent]):
        self.revision += 1
        self._deltas.append(Delta(self.revision, events))

    # ------------------------------------------------------------------
    # reads
    # ------------------------------------------------------------------

    def snapshot(self) -> GraphSnapshot:
        with self._lock:
            return GraphSnapshot(
                self.revision,
                copy.deepcopy(list(self.keyframes.values())),
                copy.deepcopy(list(self.planes.values())),
                copy.deepcopy(list(self.rooms.values())),
                copy.deepcopy(list(self.floors.values())),
            )

    def deltas_since(self, revision: int) -> list[Delta]:
        with self._lock:
            if revision > self.revision:
                raise SceneGraphError(f"future revision {revision} (current {self.revision})")
            return [copy.deepcopy(d) for d in self._deltas if d.revision > revision]

    def check_integrity(self):
        """Raise if any cross-entity reference dangles."""
        for kf in self.keyframes.values():
            for pid in kf.observed_plane_ids:
                if pid not in self.planes:
                    raise SceneGraphError(f"keyframe {kf.id} references missing plane {pid}")
        room_floor = {}
        for room in self.rooms.values():
            for pid in room.plane_ids:
                if pid not in self.planes:
                    raise SceneGraphError(f"room {room.id} references missing plane {pid}")
            if room.floor_id not in self.floors:
                raise SceneGraphError(f"room {room.id} references missing floor {room.floor_id}")
            room_floor[room.id] = room.floor_id
        seen = set()
        for floor in self.floors.values():
            for rid in floor.room_ids:
                if rid not in self.rooms:
                    raise SceneGraphError(f"floor {floor.id} lists missing room {rid}")
                if rid in seen:
                    raise SceneGraphError(f"room {rid} belongs to multiple floors")
                seen.add(rid)
        if seen != set(self.rooms):
            raise SceneGraphError("room/floor membership out of sync")
