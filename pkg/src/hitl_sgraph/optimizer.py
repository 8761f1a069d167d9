"""Levenberg-Marquardt over the factor graph.

Variables: keyframe poses (6-dof tangent, right-composed exponential
map), planes (2-dof unit-normal tangent + offset), room centers (2-dof
additive). Keyframe 0 is gauge-fixed. Human room centers are held
constant: they are operator-asserted values, and freeing them would let
the optimizer satisfy each human room factor exactly by moving the
center, draining the constraint of any effect on the rest of the graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import factors as factors_mod
from .geometry import Pose, sphere_retract

VARIABLE_DIMS = {"kf": 6, "plane": 3, "room": 2}


class OptimizationError(Exception):
    pass


@dataclass
class OptimizationConfig:
    max_iterations: int = 50
    initial_damping: float = 1e-4
    damping_up: float = 10.0
    damping_down: float = 0.1
    damping_min: float = 1e-12
    damping_max: float = 1e8
    rel_cost_tol: float = 1e-9
    step_norm_tol: float = 1e-10
    jacobian_mode: str = "numeric"  # numeric | analytic_where_available

    def __post_init__(self):
        if min(self.max_iterations, self.initial_damping, self.damping_up,
               self.damping_down, self.rel_cost_tol, self.step_norm_tol) <= 0:
            raise OptimizationError("all optimization parameters must be positive")
        if self.jacobian_mode not in ("numeric", "analytic_where_available"):
            raise OptimizationError(f"unknown jacobian mode {self.jacobian_mode!r}")


@dataclass
class OptimizationReport:
    iterations: int = 0
    initial_cost: float = 0.0
    final_cost: float = 0.0
    residual_norms: dict = field(default_factory=dict)  # per factor kind
    converged: bool = False
    diverged: bool = False
    cost_history: list = field(default_factory=list)  # accepted costs


def retract(kind: str, value, delta: np.ndarray):
    """Apply a tangent step; retract(v, 0) == v for every kind."""
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (VARIABLE_DIMS[kind],):
        raise OptimizationError(f"{kind} tangent must be {VARIABLE_DIMS[kind]}-dim, got {delta.shape}")
    if kind == "kf":
        return value.retract(delta)
    if kind == "plane":
        n, d = value
        return sphere_retract(n, delta[:2]), d + float(delta[2])
    if kind == "room":
        return np.asarray(value, dtype=float) + delta
    raise OptimizationError(f"unknown variable kind {kind!r}")


def numeric_jacobian(factor, variables: dict, eps: float = 1e-6) -> dict:
    """Central finite differences over retracted perturbations."""
    base = factors_mod.evaluate(factor, variables)
    if not np.all(np.isfinite(base)):
        raise OptimizationError("residual is not finite at the linearization point")
    out = {}
    for key in factor.var_keys():
        dim = VARIABLE_DIMS[key[0]]
        J = np.zeros((base.shape[0], dim))
        for k in range(dim):
            step = np.zeros(dim)
            step[k] = eps
            plus = dict(variables)
            plus[key] = retract(key[0], variables[key], step)
            minus = dict(variables)
            minus[key] = retract(key[0], variables[key], -step)
            J[:, k] = (factors_mod.evaluate(factor, plus) - factors_mod.evaluate(factor, minus)) / (2 * eps)
        out[key] = J
    return out


def _collect_variables(graph) -> dict:
    variables = {}
    for kf_id, kf in graph.keyframes.items():
        variables[("kf", kf_id)] = kf.pose
    for plane_id, plane in graph.planes.items():
        variables[("plane", plane_id)] = (plane.normal.copy(), float(plane.offset))
    for room_id, room in graph.rooms.items():
        variables[("room", room_id)] = room.center.copy()
    return variables


def _fixed_keys(graph) -> set:
    fixed = set()
    if graph.keyframes:
        fixed.add(("kf", min(graph.keyframes)))
    for room in graph.rooms.values():
        if room.provenance == "human":
            fixed.add(("room", room.id))
    return fixed


def _total_cost(factor_list, variables) -> tuple[float, dict]:
    cost = 0.0
    norms_sq = {}
    for factor in factor_list:
        r = factors_mod.evaluate(factor, variables)
        cost += 0.5 * float(r @ factor.noise.information @ r)
        norms_sq[factor.kind] = norms_sq.get(factor.kind, 0.0) + float(r @ r)
    return cost, {k: float(np.sqrt(v)) for k, v in norms_sq.items()}


def optimize(graph, config: OptimizationConfig | None = None) -> OptimizationReport:
    """Run LM over the graph's factors and write the result back in place
    (one new revision). Accepted cost is monotone non-increasing."""
    config = config or OptimizationConfig()
    if not graph.keyframes:
        raise OptimizationError("graph must contain at least one keyframe")

    variables = _collect_variables(graph)
    fixed = _fixed_keys(graph)
    free_keys = [k for k in sorted(variables.keys(), key=lambda k: (k[0], k[1])) if k not in fixed]
    offsets = {}
    total_dim = 0
    for key in free_keys:
        offsets[key] = total_dim
        total_dim += VARIABLE_DIMS[key[0]]

    factor_list = list(graph.factors)
    report = OptimizationReport()
    cost, _ = _total_cost(factor_list, variables)
    report.initial_cost = cost
    report.cost_history.append(cost)

    if not np.isfinite(cost):
        report.diverged = True
        report.final_cost = cost
        return report

    lam = config.initial_damping
    converged = cost < 1e-15 or total_dim == 0
    iterations = 0

    while not converged and iterations < config.max_iterations:
        iterations += 1
        H = np.zeros((total_dim, total_dim))
        g = np.zeros(total_dim)
        for factor in factor_list:
            if config.jacobian_mode == "analytic_where_available":
                blocks = factors_mod.analytic_jacobians(factor, variables)
            else:
                blocks = numeric_jacobian(factor, variables)
            r = factors_mod.evaluate(factor, variables)
            sqrt_info = factor.noise.sqrt_information()
            r_w = sqrt_info @ r
            keys = [k for k in factor.var_keys() if k in offsets]
            whitened = {k: sqrt_info @ blocks[k] for k in keys}
            for ka in keys:
                a = offsets[ka]
                da = VARIABLE_DIMS[ka[0]]
                g[a:a + da] += whitened[ka].T @ r_w
                for kb in keys:
                    b = offsets[kb]
                    db = VARIABLE_DIMS[kb[0]]
                    H[a:a + da, b:b + db] += whitened[ka].T @ whitened[kb]

        accepted = False
        while not accepted:
            try:
                delta = np.linalg.solve(H + lam * np.eye(total_dim), -g)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None and np.all(np.isfinite(delta)):
                candidate = dict(variables)
                for key in free_keys:
                    a = offsets[key]
                    d = VARIABLE_DIMS[key[0]]
                    candidate[key] = retract(key[0], variables[key], delta[a:a + d])
                new_cost, _ = _total_cost(factor_list, candidate)
                if not np.isfinite(new_cost):
                    report.diverged = True
                    report.final_cost = cost
                    report.iterations = iterations
                    return report
                if new_cost <= cost:
                    step_norm = float(np.linalg.norm(delta))
                    rel_decrease = (cost - new_cost) / max(cost, 1e-30)
                    variables = candidate
                    cost = new_cost
                    report.cost_history.append(cost)
                    lam = max(lam * config.damping_down, config.damping_min)
                    accepted = True
                    if rel_decrease < config.rel_cost_tol or step_norm < config.step_norm_tol:
                        converged = True
                    continue
            lam = lam * config.damping_up
            if lam > config.damping_max:
                # cannot make progress at maximum damping: treat as converged
                converged = True
                accepted = True

    report.iterations = iterations
    report.converged = converged
    report.final_cost = cost
    _, report.residual_norms = _total_cost(factor_list, variables)

    poses = {k[1]: variables[k] for k in free_keys if k[0] == "kf"}
    planes = {k[1]: variables[k] for k in free_keys if k[0] == "plane"}
    rooms = {k[1]: variables[k] for k in free_keys if k[0] == "room"}
    graph.apply_optimized_values(poses, planes, rooms)
    return report
