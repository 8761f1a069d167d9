"""Deterministic desk-scale worlds: rectangular-room floorplans, robot
trajectories, noisy odometry and plane observations with occlusions,
plus scripted human interventions for headless end-to-end runs.

Scenario and log files are YAML documents with a versioned `schema: 1`
field and a strict field set (unknown keys are rejected). Trajectories
export in TUM format: `timestamp tx ty tz qx qy qz qw`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .geometry import Pose, quat_from_yaw, sphere_retract
from .scene_graph import Plane, PlaneExtent, PlaneObservation, RoomValidationError, SceneGraph
from .room_detect import DetectorConfig, detect_rooms
from .optimizer import OptimizationConfig, OptimizationReport, optimize
from . import factors

SCHEMA_VERSION = 1
VISIBILITY_RANGE = 8.0  # meters
KEYFRAME_DISTANCE = 0.5  # meters traveled
KEYFRAME_YAW = np.deg2rad(30.0)  # accumulated heading change
WALL_SIDES = ("-x", "+x", "-y", "+y")


class ScenarioError(Exception):
    """Scenario/log file parse or schema violation."""


# ----------------------------------------------------------------------
# scenario schema
# ----------------------------------------------------------------------


@dataclass
class RectRoom:
    min_xy: np.ndarray
    max_xy: np.ndarray
    height: float

    @property
    def center(self) -> np.ndarray:
        return (self.min_xy + self.max_xy) / 2.0

    def to_dict(self) -> dict:
        return {"min": [float(v) for v in self.min_xy], "max": [float(v) for v in self.max_xy],
                "height": float(self.height)}


@dataclass
class Waypoint:
    t: float
    x: float
    y: float
    yaw: float  # radians internally; files carry degrees

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class NoiseSpec:
    odom_translation: float = 0.0  # m per keyframe step
    odom_rotation: float = 0.0  # rad per keyframe step
    plane_normal: float = 0.0  # rad
    plane_offset: float = 0.0  # m

    def to_dict(self) -> dict:
        return {"odom_translation": self.odom_translation, "odom_rotation": self.odom_rotation,
                "plane_normal": self.plane_normal, "plane_offset": self.plane_offset}


@dataclass
class Intervention:
    time: float
    plane_keys: tuple[str, str, str, str]

    def to_dict(self) -> dict:
        return {"time": float(self.time), "plane_keys": list(self.plane_keys)}


@dataclass
class Scenario:
    name: str
    rooms: list[RectRoom]
    trajectory: list[Waypoint]
    noise: NoiseSpec
    occluded_plane_keys: list[str] = field(default_factory=list)
    interventions: list[Intervention] = field(default_factory=list)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "seed": int(self.seed),
            "rooms": [r.to_dict() for r in self.rooms],
            "trajectory": [{"t": w.t, "x": w.x, "y": w.y, "yaw_deg": float(np.rad2deg(w.yaw))}
                           for w in self.trajectory],
            "noise": self.noise.to_dict(),
            "occluded_plane_keys": list(self.occluded_plane_keys),
            "interventions": [iv.to_dict() for iv in self.interventions],
        }


def _require(mapping: dict, context: str, required: dict, optional: dict | None = None) -> dict:
    """Strict field extraction: every key must be known, required keys present."""
    optional = optional or {}
    if not isinstance(mapping, dict):
        raise ScenarioError(f"{context}: expected a mapping, got {type(mapping).__name__}")
    unknown = set(mapping) - set(required) - set(optional)
    if unknown:
        raise ScenarioError(f"{context}: unknown field(s) {sorted(unknown)}")
    missing = set(required) - set(mapping)
    if missing:
        raise ScenarioError(f"{context}: missing field(s) {sorted(missing)}")
    out = dict(optional)
    out.update(mapping)
    return out


def _number(value, context: str, minimum=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{context}: expected a number, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(f"{context}: {value} below minimum {minimum}")
    return float(value)


def scenario_from_dict(doc: dict) -> Scenario:
    top = _require(doc, "scenario", {"schema": None, "name": None, "rooms": None, "trajectory": None},
                   {"noise": {}, "occluded_plane_keys": [], "interventions": [], "seed": 0})
    if top["schema"] != SCHEMA_VERSION:
        raise ScenarioError(f"scenario: unsupported schema {top['schema']!r} (expected {SCHEMA_VERSION})")
    rooms = []
    for i, rd in enumerate(top["rooms"]):
        rf = _require(rd, f"rooms[{i}]", {"min": None, "max": None}, {"height": 3.0})
        min_xy = np.array([_number(v, f"rooms[{i}].min") for v in rf["min"]])
        max_xy = np.array([_number(v, f"rooms[{i}].max") for v in rf["max"]])
        if min_xy.shape != (2,) or max_xy.shape != (2,):
            raise ScenarioError(f"rooms[{i}]: min/max must be 2-vectors")
        if not np.all(max_xy > min_xy):
            raise ScenarioError(f"rooms[{i}]: degenerate rectangle {min_xy.tolist()}..{max_xy.tolist()}")
        rooms.append(RectRoom(min_xy, max_xy, _number(rf["height"], f"rooms[{i}].height", minimum=1e-6)))
    if not rooms:
        raise ScenarioError("scenario: at least one room required")

    waypoints = []
    for i, wd in enumerate(top["trajectory"]):
        wf = _require(wd, f"trajectory[{i}]", {"t": None, "x": None, "y": None}, {"yaw_deg": 0.0})
        waypoints.append(Waypoint(
            _number(wf["t"], f"trajectory[{i}].t"),
            _number(wf["x"], f"trajectory[{i}].x"),
            _number(wf["y"], f"trajectory[{i}].y"),
            float(np.deg2rad(_number(wf["yaw_deg"], f"trajectory[{i}].yaw_deg"))),
        ))
    if len(waypoints) < 2:
        raise ScenarioError("trajectory: need at least two waypoints")
    for a, b in zip(waypoints, waypoints[1:]):
        if b.t <= a.t:
            raise ScenarioError(f"trajectory: timestamps must strictly increase ({a.t} -> {b.t})")

    nf = _require(top["noise"], "noise", {},
                  {"odom_translation": 0.0, "odom_rotation": 0.0, "plane_normal": 0.0, "plane_offset": 0.0})
    noise = NoiseSpec(**{k: _number(v, f"noise.{k}", minimum=0.0) for k, v in nf.items()})

    valid_keys = {wall_key(i, side) for i in range(len(rooms)) for side in WALL_SIDES}
    occluded = list(top["occluded_plane_keys"])
    for key in occluded:
        if key not in valid_keys:
            raise ScenarioError(f"occluded_plane_keys: unknown plane key {key!r}")

    interventions = []
    for i, ivd in enumerate(top["interventions"]):
        ivf = _require(ivd, f"interventions[{i}]", {"time": None, "plane_keys": None})
        keys = list(ivf["plane_keys"])
        if len(keys) != 4:
            raise ScenarioError(f"interventions[{i}]: need exactly 4 plane keys")
        for key in keys:
            if key not in valid_keys:
                raise ScenarioError(f"interventions[{i}]: unknown plane key {key!r}")
        interventions.append(Intervention(_number(ivf["time"], f"interventions[{i}].time"), tuple(keys)))

    if not isinstance(top["seed"], int) or isinstance(top["seed"], bool):
        raise ScenarioError("scenario: seed must be an integer")
    if not isinstance(top["name"], str) or not top["name"]:
        raise ScenarioError("scenario: name must be a non-empty string")
    return Scenario(top["name"], rooms, waypoints, noise, occluded, interventions, top["seed"])


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}")
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark else ""
        raise ScenarioError(f"scenario parse error{where}: {exc}")
    return scenario_from_dict(doc)


def builtin_scenario_path(name: str):
    """Path of a packaged scenario ('occlusion', 'noiseless')."""
    from importlib import resources

    path = resources.files("hitl_sgraph") / "scenarios" / f"{name}.yaml"
    if not path.is_file():
        raise ScenarioError(f"no builtin scenario {name!r}")
    return path


def resolve_scenario(name_or_path) -> Scenario:
    """Load a scenario from a file path or a builtin name."""
    import os

    if os.path.exists(name_or_path):
        return load_scenario(name_or_path)
    return load_scenario(builtin_scenario_path(str(name_or_path)))


def save_scenario(scenario: Scenario, path):
    with open(path, "w") as fh:
        yaml.safe_dump(scenario.to_dict(), fh, sort_keys=False)


# ----------------------------------------------------------------------
# ground-truth walls
# ----------------------------------------------------------------------


def wall_key(room_index: int, side: str) -> str:
    return f"room{room_index}:wall:{side}"


@dataclass
class GtWall:
    key: str
    normal: np.ndarray
    offset: float
    extent: PlaneExtent

    def as_plane(self, plane_id: int) -> Plane:
        return Plane(plane_id, self.normal.copy(), self.offset,
                     PlaneExtent(self.extent.center.copy(), self.extent.half_u, self.extent.half_v),
                     provenance="ground_truth")


def ground_truth_walls(rooms: list[RectRoom]) -> list[GtWall]:
    """Four inward-facing wall planes per room, keyed room{i}:wall:{side}."""
    walls = []
    for i, room in enumerate(rooms):
        (x0, y0), (x1, y1) = room.min_xy, room.max_xy
        cy, cx, h2 = (y0 + y1) / 2, (x0 + x1) / 2, room.height / 2
        half_x, half_y = (x1 - x0) / 2, (y1 - y0) / 2
        sides = {
            "-x": (np.array([1.0, 0.0, 0.0]), -x0, np.array([x0, cy, h2]), half_y),
            "+x": (np.array([-1.0, 0.0, 0.0]), x1, np.array([x1, cy, h2]), half_y),
            "-y": (np.array([0.0, 1.0, 0.0]), -y0, np.array([cx, y0, h2]), half_x),
            "+y": (np.array([0.0, -1.0, 0.0]), y1, np.array([cx, y1, h2]), half_x),
        }
        for side in WALL_SIDES:
            n, d, center, half_u = sides[side]
            walls.append(GtWall(wall_key(i, side), n, d, PlaneExtent(center, half_u, h2)))
    return walls


def _point_to_extent_distance(p: np.ndarray, wall: GtWall) -> float:
    from .geometry import plane_axes

    u, v = plane_axes(wall.normal)
    rel = p - wall.extent.center
    dn = float(wall.normal @ rel)
    du = max(0.0, abs(float(u @ rel)) - wall.extent.half_u)
    dv = max(0.0, abs(float(v @ rel)) - wall.extent.half_v)
    return math.sqrt(dn * dn + du * du + dv * dv)


# ----------------------------------------------------------------------
# simulation
# ----------------------------------------------------------------------


@dataclass
class LoggedObservation:
    key: str
    normal: np.ndarray  # body frame, noisy
    offset: float
    extent_center: np.ndarray  # body frame
    half_u: float
    half_v: float

    def to_dict(self) -> dict:
        return {"key": self.key, "normal": [float(v) for v in self.normal], "offset": float(self.offset),
                "extent_center": [float(v) for v in self.extent_center],
                "half_u": float(self.half_u), "half_v": float(self.half_v)}

    @staticmethod
    def from_dict(d: dict) -> "LoggedObservation":
        return LoggedObservation(d["key"], np.array(d["normal"], dtype=float), d["offset"],
                                 np.array(d["extent_center"], dtype=float), d["half_u"], d["half_v"])


@dataclass
class LoggedKeyframe:
    stamp: float
    gt_pose: Pose
    odometry: Pose  # absolute start pose for the first entry, increments after
    observations: list[LoggedObservation]

    def to_dict(self) -> dict:
        return {"stamp": float(self.stamp), "gt_pose": self.gt_pose.to_list(),
                "odometry": self.odometry.to_list(),
                "observations": [o.to_dict() for o in self.observations]}

    @staticmethod
    def from_dict(d: dict) -> "LoggedKeyframe":
        return LoggedKeyframe(d["stamp"], Pose.from_list(d["gt_pose"]), Pose.from_list(d["odometry"]),
                              [LoggedObservation.from_dict(o) for o in d["observations"]])


@dataclass
class SimulationLog:
    scenario_name: str
    seed: int
    keyframes: list[LoggedKeyframe]
    gt_rooms: list[RectRoom]
    gt_walls: list[GtWall]
    interventions: list[Intervention]

    def gt_trajectory(self) -> list[tuple[float, Pose]]:
        return [(kf.stamp, kf.gt_pose) for kf in self.keyframes]

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "scenario_name": self.scenario_name,
            "seed": int(self.seed),
            "keyframes": [k.to_dict() for k in self.keyframes],
            "gt_rooms": [r.to_dict() for r in self.gt_rooms],
            "gt_walls": [{"key": w.key, "normal": [float(v) for v in w.normal], "offset": float(w.offset),
                          "extent": w.extent.to_dict()} for w in self.gt_walls],
            "interventions": [iv.to_dict() for iv in self.interventions],
        }

    @staticmethod
    def from_dict(doc: dict) -> "SimulationLog":
        top = _require(doc, "log", {"schema": None, "scenario_name": None, "seed": None, "keyframes": None,
                                    "gt_rooms": None, "gt_walls": None, "interventions": None})
        if top["schema"] != SCHEMA_VERSION:
            raise ScenarioError(f"log: unsupported schema {top['schema']!r}")
        rooms = [RectRoom(np.array(r["min"], dtype=float), np.array(r["max"], dtype=float), r["height"])
                 for r in top["gt_rooms"]]
        walls = [GtWall(w["key"], np.array(w["normal"], dtype=float), w["offset"],
                        PlaneExtent.from_dict(w["extent"])) for w in top["gt_walls"]]
        return SimulationLog(top["scenario_name"], top["seed"],
                             [LoggedKeyframe.from_dict(k) for k in top["keyframes"]],
                             rooms, walls,
                             [Intervention(iv["time"], tuple(iv["plane_keys"])) for iv in top["interventions"]])

    def save(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)

    @staticmethod
    def load(path) -> "SimulationLog":
        try:
            with open(path) as fh:
                doc = yaml.safe_load(fh)
        except FileNotFoundError:
            raise ScenarioError(f"log file not found: {path}")
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}" if mark else ""
            raise ScenarioError(f"log parse error{where}: {exc}")
        return SimulationLog.from_dict(doc)


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def _sample_gt_poses(trajectory: list[Waypoint]) -> list[tuple[float, Pose]]:
    """Keyframe ground-truth poses: one every 0.5 m traveled or 30 deg
    yawed, whichever first, starting at the first waypoint."""
    poses = [(trajectory[0].t, Pose.from_xy_yaw(trajectory[0].x, trajectory[0].y, trajectory[0].yaw))]
    dist_acc = 0.0
    yaw_acc = 0.0
    prev_xy = trajectory[0].position()
    prev_yaw = trajectory[0].yaw
    for a, b in zip(trajectory, trajectory[1:]):
        seg_len = float(np.linalg.norm(b.position() - a.position()))
        dyaw = _wrap_angle(b.yaw - a.yaw)
        steps = max(1, int(math.ceil(seg_len / 0.05)), int(math.ceil(abs(dyaw) / np.deg2rad(2.0))))
        for s in range(1, steps + 1):
            frac = s / steps
            xy = a.position() + frac * (b.position() - a.position())
            yaw = a.yaw + frac * dyaw
            t = a.t + frac * (b.t - a.t)
            dist_acc += float(np.linalg.norm(xy - prev_xy))
            yaw_acc += abs(_wrap_angle(yaw - prev_yaw))
            prev_xy, prev_yaw = xy, yaw
            if dist_acc >= KEYFRAME_DISTANCE or yaw_acc >= KEYFRAME_YAW:
                poses.append((t, Pose.from_xy_yaw(xy[0], xy[1], yaw)))
                dist_acc = 0.0
                yaw_acc = 0.0
    return poses


def simulate(scenario: Scenario, seed: int | None = None) -> SimulationLog:
    """Deterministic sensor log for a scenario; same seed, same bytes."""
    seed = scenario.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    walls = ground_truth_walls(scenario.rooms)
    occluded = set(scenario.occluded_plane_keys)
    gt_poses = _sample_gt_poses(scenario.trajectory)

    inside_any = any(
        np.all(pose.t[:2] >= room.min_xy) and np.all(pose.t[:2] <= room.max_xy)
        for _, pose in gt_poses for room in scenario.rooms
    )
    if not inside_any:
        import logging
        logging.getLogger(__name__).warning("trajectory never enters any room")

    keyframes = []
    prev_gt: Pose | None = None
    for stamp, gt_pose in gt_poses:
        if prev_gt is None:
            odom = gt_pose  # absolute start; the estimate's gauge anchor
        else:
            inc = prev_gt.inverse().compose(gt_pose)
            noise_xy = rng.normal(0.0, 1.0, 2) * scenario.noise.odom_translation
            noise_yaw = rng.normal(0.0, 1.0) * scenario.noise.odom_rotation
            odom = Pose(
                inc.q, inc.t + np.array([noise_xy[0], noise_xy[1], 0.0])
            ).compose(Pose(quat_from_yaw(noise_yaw), np.zeros(3)))
        prev_gt = gt_pose

        observations = []
        R = gt_pose.rotation_matrix()
        for wall in walls:
            if wall.key in occluded:
                continue
            if float(wall.normal @ gt_pose.t) + wall.offset <= 1e-9:
                continue  # back side: not facing the sensor
            if _point_to_extent_distance(gt_pose.t, wall) > VISIBILITY_RANGE:
                continue
            n_b = R.T @ wall.normal
            d_b = wall.offset + float(wall.normal @ gt_pose.t)
            angles = rng.normal(0.0, 1.0, 2) * scenario.noise.plane_normal
            d_noise = rng.normal(0.0, 1.0) * scenario.noise.plane_offset
            n_noisy = sphere_retract(n_b, angles)
            center_b = gt_pose.inverse().transform(wall.extent.center)
            observations.append(LoggedObservation(wall.key, n_noisy, d_b + d_noise,
                                                  center_b, wall.extent.half_u, wall.extent.half_v))
        keyframes.append(LoggedKeyframe(stamp, gt_pose, odom, observations))

    return SimulationLog(scenario.name, seed, keyframes, list(scenario.rooms), walls,
                         list(scenario.interventions))


# ----------------------------------------------------------------------
# pipeline
# ----------------------------------------------------------------------


@dataclass
class PipelineOptions:
    auto_detect: bool = True
    interventions: bool = False
    human_weight: float = factors.DEFAULT_HUMAN_WEIGHT
    optimize_every: int = 1  # keyframes between optimization passes
    online_max_iterations: int = 3  # inter-keyframe passes are warm-started
    jacobian_mode: str = "analytic_where_available"
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    optimization: OptimizationConfig | None = None

    def opt_config(self, final: bool = True) -> OptimizationConfig:
        if self.optimization is not None:
            return self.optimization
        config = OptimizationConfig(jacobian_mode=self.jacobian_mode)
        if not final:
            config.max_iterations = self.online_max_iterations
        return config


@dataclass
class PipelineReport:
    auto_rooms: list[int] = field(default_factory=list)
    human_rooms: list[int] = field(default_factory=list)
    applied_interventions: int = 0
    failed_interventions: list[tuple[float, str]] = field(default_factory=list)
    diverged: bool = False
    final_optimization: OptimizationReport | None = None


@dataclass
class PipelineResult:
    graph: SceneGraph
    trajectory: list[tuple[float, Pose]]
    report: PipelineReport
    key_to_plane: dict[str, int]


class PipelineRunner:
    """Feeds a simulation log into the SLAM back-end keyframe by
    keyframe; shared by the headless pipeline and the live service."""

    def __init__(self, log: SimulationLog, options: PipelineOptions | None = None):
        self.log = log
        self.options = options or PipelineOptions()
        self.graph = SceneGraph(human_weight=self.options.human_weight)
        self.report = PipelineReport()
        self.key_to_plane: dict[str, int] = {}
        self._pending = sorted(log.interventions, key=lambda iv: iv.time) if self.options.interventions else []
        self._cursor = 0
        self._since_opt = 0

    @property
    def finished(self) -> bool:
        return self._cursor >= len(self.log.keyframes)

    def step(self) -> int | None:
        """Process the next log keyframe; returns its keyframe id."""
        if self.finished:
            return None
        entry = self.log.keyframes[self._cursor]
        self._cursor += 1
        if self._cursor == 1:
            pose_est = entry.odometry
        else:
            prev = self.graph.keyframes[max(self.graph.keyframes)]
            pose_est = prev.pose.compose(entry.odometry)
        observations = [
            PlaneObservation(o.normal, o.offset, o.extent_center, o.half_u, o.half_v, gt_key=o.key)
            for o in entry.observations
        ]
        kf_id = self.graph.add_keyframe(pose_est, entry.stamp, observations)
        for obs, plane_id in zip(entry.observations, self.graph.keyframes[kf_id].observed_plane_ids):
            self.key_to_plane.setdefault(obs.key, plane_id)

        mutated = self._apply_interventions(entry.stamp)
        if self.options.auto_detect:
            for cand in detect_rooms(self.graph, self.options.detector):
                try:
                    room_id = self.graph.add_room(cand.plane_ids, "auto")
                    self.report.auto_rooms.append(room_id)
                    mutated = True
                except RoomValidationError:
                    pass
        self._since_opt += 1
        if mutated or self._since_opt >= self.options.optimize_every or self.finished:
            self.optimize(final=self.finished)
        return kf_id

    def _apply_interventions(self, stamp: float) -> bool:
        mutated = False
        while self._pending and self._pending[0].time <= stamp:
            iv = self._pending.pop(0)
            missing = [k for k in iv.plane_keys if k not in self.key_to_plane]
            if missing:
                self.report.failed_interventions.append((iv.time, f"unobserved plane keys {missing}"))
                continue
            ids = tuple(self.key_to_plane[k] for k in iv.plane_keys)
            try:
                room_id = self.graph.add_room(ids, "human")
                self.report.human_rooms.append(room_id)
                self.report.applied_interventions += 1
                mutated = True
            except RoomValidationError as exc:
                self.report.failed_interventions.append((iv.time, exc.violation))
        return mutated

    def optimize(self, final: bool = True) -> OptimizationReport:
        self._since_opt = 0
        report = optimize(self.graph, self.options.opt_config(final))
        self.report.final_optimization = report
        if report.diverged:
            self.report.diverged = True
        return report

    def trajectory(self) -> list[tuple[float, Pose]]:
        return [(kf.stamp, kf.pose) for kf in
                (self.graph.keyframes[i] for i in sorted(self.graph.keyframes))]

    def result(self) -> PipelineResult:
        return PipelineResult(self.graph, self.trajectory(), self.report, dict(self.key_to_plane))


def run_pipeline(log: SimulationLog, options: PipelineOptions | None = None) -> PipelineResult:
    """Headless end-to-end run over a complete log."""
    runner = PipelineRunner(log, options)
    while not runner.finished:
        runner.step()
    # interventions timed after the last keyframe still apply
    if runner._pending:
        if runner._apply_interventions(float("inf")):
            runner.optimize()
    return runner.result()


def evaluate_run(log: SimulationLog, result: PipelineResult) -> dict:
    """Standard metric set for one pipeline run against its log."""
    from .metrics import ate, map_rmse, room_prf

    gt_planes = [w.as_plane(i) for i, w in enumerate(log.gt_walls)]
    est_planes = list(result.graph.planes.values())
    prf = room_prf([r.center for r in result.graph.rooms.values()],
                   [r.center for r in log.gt_rooms])
    return {
        "ate_m": ate(result.trajectory, log.gt_trajectory()),
        "map_rmse_m": map_rmse(est_planes, gt_planes) if est_planes else float("nan"),
        "precision": prf["precision"],
        "recall": prf["recall"],
        "f1": prf["f1"],
    }
