"""LM optimizer: retraction, numeric/analytic Jacobian agreement,
convergence behavior, and gauge handling."""

import numpy as np
import pytest

from hitl_sgraph import factors, optimizer
from hitl_sgraph.geometry import Pose, sphere_retract
from hitl_sgraph.optimizer import OptimizationConfig, numeric_jacobian, optimize, retract
from hitl_sgraph.scene_graph import SceneGraph

from conftest import RECT_WALLS_4X6, observations_of

RNG = np.random.default_rng(11)


def rand_pose(scale=3.0) -> Pose:
    q = RNG.normal(size=4)
    return Pose(q / np.linalg.norm(q), RNG.normal(scale=scale, size=3))


class TestRetract:
    def test_pose_zero(self):
        assert retract("kf", Pose.identity(), np.zeros(6)).almost_equal(Pose.identity(), 1e-15)

    def test_room_addition(self):
        out = retract("room", np.array([1.0, 2.0]), np.array([0.5, -1.0]))
        assert np.allclose(out, [1.5, 1.0])

    def test_plane_normal_stays_unit(self):
        n = np.array([1.0, 0.0, 0.0])
        d = 2.0
        for _ in range(1000):
            n, d = retract("plane", (n, d), RNG.normal(scale=0.5, size=3))
            assert abs(np.linalg.norm(n) - 1.0) < 1e-12

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(optimizer.OptimizationError):
            retract("kf", Pose.identity(), np.zeros(5))
        with pytest.raises(optimizer.OptimizationError):
            retract("room", np.zeros(2), np.zeros(3))


class TestNumericJacobian:
    def test_room_factor_center_block_is_identity(self):
        variables = {
            ("room", 0): np.array([2.0, 3.0]),
            ("plane", 0): (np.array([1.0, 0, 0]), 0.0),
            ("plane", 1): (np.array([-1.0, 0, 0]), 4.0),
            ("plane", 2): (np.array([0.0, 1, 0]), 0.0),
            ("plane", 3): (np.array([0.0, -1, 0]), 6.0),
        }
        f = factors.room_factor(0, (0, 1, 2, 3))
        J = numeric_jacobian(f, variables)
        assert np.allclose(J[("room", 0)], np.eye(2), atol=1e-9)

    def test_odometry_identity_block_at_satisfied_measurement(self):
        measured = rand_pose()
        pose_i = rand_pose()
        variables = {("kf", 0): pose_i, ("kf", 1): pose_i.compose(measured)}
        f = factors.odometry_factor(0, 1, measured)
        J = numeric_jacobian(f, variables)
        # at zero error the right-perturbation block of pose_j is identity
        assert np.allclose(J[("kf", 1)], np.eye(6), atol=1e-6)

    @pytest.mark.parametrize("kind", ["odometry", "plane_obs", "room"])
    def test_analytic_matches_numeric(self, kind):
        for _ in range(100):
            if kind == "odometry":
                f = factors.odometry_factor(0, 1, rand_pose())
                variables = {("kf", 0): rand_pose(), ("kf", 1): rand_pose()}
            elif kind == "plane_obs":
                n_o = RNG.normal(size=3)
                f = factors.plane_obs_factor(0, 0, n_o / np.linalg.norm(n_o), RNG.normal())
                n_w = RNG.normal(size=3)
                variables = {("kf", 0): rand_pose(),
                             ("plane", 0): (n_w / np.linalg.norm(n_w), float(RNG.normal()))}
            else:
                x0, y0 = RNG.uniform(-5, 5, 2)
                w, h = RNG.uniform(2, 8, 2)
                variables = {("room", 0): RNG.uniform(-5, 5, 2)}
                geo = [([1.0, 0, 0], -x0), ([-1.0, 0, 0], x0 + w),
                       ([0.0, 1, 0], -y0), ([0.0, -1, 0], y0 + h)]
                for pid, (n, d) in enumerate(geo):
                    tilted = sphere_retract(np.array(n), RNG.normal(scale=0.02, size=2))
                    variables[("plane", pid)] = (tilted, d)
                f = factors.room_factor(0, (0, 1, 2, 3))
            A = factors.analytic_jacobians(f, variables)
            N = numeric_jacobian(f, variables)
            for key in A:
                denom = max(1.0, np.abs(N[key]).max())
                assert np.abs(A[key] - N[key]).max() / denom < 1e-5


def single_room_graph() -> SceneGraph:
    g = SceneGraph()
    pose = Pose.from_xy_yaw(2.0, 3.0, 0.0)
    g.add_keyframe(pose, 0.0, observations_of(pose, RECT_WALLS_4X6))
    return g


class TestOptimize:
    def test_requires_a_keyframe(self):
        with pytest.raises(optimizer.OptimizationError):
            optimize(SceneGraph())

    def test_noiseless_graph_converges_immediately(self):
        g = single_room_graph()
        g.add_room(tuple(g.planes), "auto")
        report = optimize(g)
        assert report.converged
        assert report.iterations <= 2
        assert report.final_cost < 1e-12

    def test_offset_room_center_converges_to_centroid(self):
        g = single_room_graph()
        rid = g.add_room(tuple(g.planes), "auto")
        g.rooms[rid].center = g.rooms[rid].center + np.array([0.5, 0.0])
        report = optimize(g)
        assert report.converged
        assert np.linalg.norm(g.rooms[rid].center - [2.0, 3.0]) < 1e-8

    def test_human_room_center_held_constant(self):
        g = single_room_graph()
        rid = g.add_room(tuple(g.planes), "human")
        g.rooms[rid].center = np.array([2.25, 3.0])  # pretend the operator pinned it
        optimize(g)
        assert np.allclose(g.rooms[rid].center, [2.25, 3.0])

    def test_accepted_cost_monotone(self):
        g = single_room_graph()
        rng = np.random.default_rng(3)
        pose = Pose.from_xy_yaw(2.2, 3.1, 0.05)
        obs = observations_of(pose, RECT_WALLS_4X6)
        for o in obs:
            o.offset += rng.normal(scale=0.05)
        g.add_keyframe(pose.retract(rng.normal(scale=0.05, size=6)), 1.0, obs)
        report = optimize(g)
        hist = report.cost_history
        assert all(b <= a + 1e-15 for a, b in zip(hist, hist[1:]))
        assert report.final_cost <= report.initial_cost

    def test_gauge_translation_invariance(self):
        costs = []
        for shift in (np.zeros(3), np.array([100.0, -40.0, 0.0])):
            g = SceneGraph()
            rng = np.random.default_rng(8)
            walls = [(n, d - float(n @ shift), c + shift, hu, hv)
                     for n, d, c, hu, hv in RECT_WALLS_4X6]
            prev = None
            for k in range(5):
                pose = Pose.from_xy_yaw(1.5 + 0.2 * k + shift[0], 3.0 + shift[1], 0.1 * k)
                obs = observations_of(pose, walls)
                for o in obs:
                    o.offset += rng.normal(scale=0.03)
                noisy = pose if prev is None else prev[1].compose(
                    prev[0].inverse().compose(pose)).retract(rng.normal(scale=0.01, size=6))
                g.add_keyframe(noisy, float(k), obs)
                prev = (pose, g.keyframes[k].pose)
            report = optimize(g)
            costs.append(report.final_cost)
        assert np.isclose(costs[0], costs[1], rtol=1e-6, atol=1e-12)

    def test_updates_committed_at_new_revision(self):
        g = single_room_graph()
        rid = g.add_room(tuple(g.planes), "auto")
        g.rooms[rid].center = g.rooms[rid].center + np.array([0.3, 0.0])
        rev = g.revision
        optimize(g)
        assert g.revision == rev + 1
        assert g.deltas_since(rev)


class TestHumanWeightEffect:
    def test_higher_weight_tracks_centroid_at_least_as_closely(self):
        # identical noisy graphs, human room at kappa=10 vs barely above 1;
        # after convergence the strong weight leaves |e| no larger
        def build(weight):
            rng = np.random.default_rng(6)
            g = SceneGraph(human_weight=weight)
            prev_gt = prev_est = None
            for k in range(6):
                gt_pose = Pose.from_xy_yaw(1.0 + 0.4 * k, 3.0, 0.0)
                obs = observations_of(gt_pose, RECT_WALLS_4X6)
                for o in obs:
                    o.offset += rng.normal(scale=0.03)
                if prev_gt is None:
                    est = gt_pose
                else:
                    inc = prev_gt.inverse().compose(gt_pose).retract(rng.normal(scale=0.03, size=6))
                    est = prev_est.compose(inc)
                g.add_keyframe(est, float(k), obs)
                prev_gt, prev_est = gt_pose, g.keyframes[k].pose
            rid = g.add_room(tuple(g.planes)[:4], "human")
            optimize(g)
            room = g.rooms[rid]
            planes = [g.planes[p] for p in room.plane_ids]
            return float(np.linalg.norm(factors.room_residual(room.center, planes)))

        strong = build(10.0)
        weak = build(1.0 + 1e-9)
        assert strong <= weak + 1e-12


class TestNumericJacobianErrors:
    def test_non_finite_residual_rejected(self):
        f = factors.odometry_factor(0, 1, Pose.identity())
        variables = {("kf", 0): Pose.identity(), ("kf", 1): Pose(t=(np.nan, 0, 0))}
        with pytest.raises(optimizer.OptimizationError, match="finite"):
            numeric_jacobian(f, variables)


class TestHumanRoomCostBound:
    def test_other_factor_cost_bounded_by_room_initial_cost(self):
        # re-optimizing after adding a human room may not raise the other
        # factors' cost by more than the room factor's own starting cost
        rng = np.random.default_rng(21)
        g = SceneGraph()
        prev_gt = prev_est = None
        for k in range(8):
            gt_pose = Pose.from_xy_yaw(1.0 + 0.3 * k, 3.0, 0.0)
            obs = observations_of(gt_pose, RECT_WALLS_4X6)
            for o in obs:
                o.offset += rng.normal(scale=0.02)
                o.normal = sphere_retract(o.normal, rng.normal(scale=0.01, size=2))
            if prev_gt is None:
                est = gt_pose
            else:
                inc = prev_gt.inverse().compose(gt_pose).retract(rng.normal(scale=0.02, size=6))
                est = prev_est.compose(inc)
            g.add_keyframe(est, float(k), obs)
            prev_gt, prev_est = gt_pose, g.keyframes[k].pose
        optimize(g)

        def kind_cost(graph, kinds):
            variables = optimizer._collect_variables(graph)
            total = 0.0
            for f in graph.factors:
                if f.kind in kinds:
                    r = factors.evaluate(f, variables)
                    total += 0.5 * float(r @ f.noise.information @ r)
            return total

        baseline_other = kind_cost(g, ("odometry", "plane_obs"))
        g.add_room(tuple(g.planes)[:4], "human")
        room_initial = kind_cost(g, ("room",))
        optimize(g)
        after_other = kind_cost(g, ("odometry", "plane_obs"))
        assert after_other <= baseline_other + room_initial + 1e-12
