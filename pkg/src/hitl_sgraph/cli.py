"""Command-line entry points: simulate, run headless pipelines, evaluate
trajectories, serve live sessions, and compare baseline vs interventions.

Exit codes: 0 success, 1 usage error, 2 input error, 3 divergence.
Set HITL_SGRAPH_LOG=debug|info|warning for log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import metrics, service, simulator

CSV_HEADER = "scenario,seed,method,ate_m,map_rmse_m,precision,recall,f1"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_DIVERGED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _csv_row(scenario: str, seed: int, method: str, m: dict) -> str:
    vals = [m["ate_m"], m["map_rmse_m"], m["precision"], m["recall"], m["f1"]]
    return f"{scenario},{seed},{method}," + ",".join(f"{v:.9g}" for v in vals)


def _pipeline_options(args, interventions: bool) -> simulator.PipelineOptions:
    return simulator.PipelineOptions(
        auto_detect=not getattr(args, "no_auto_detect", False),
        interventions=interventions,
        human_weight=getattr(args, "kappa", 10.0),
        optimize_every=getattr(args, "optimize_every", 4),
    )


def cmd_sim(args) -> int:
    scenario = simulator.resolve_scenario(args.scenario)
    log = simulator.simulate(scenario, seed=args.seed)
    log.save(args.out)
    print(f"wrote {args.out}: {len(log.keyframes)} keyframes, "
          f"{len(log.gt_walls)} walls, {len(log.gt_rooms)} rooms")
    return EXIT_OK


def cmd_run(args) -> int:
    log = simulator.SimulationLog.load(args.log)
    result = simulator.run_pipeline(log, _pipeline_options(args, args.interventions))
    if result.report.diverged:
        print("optimization diverged", file=sys.stderr)
        return EXIT_DIVERGED
    m = simulator.evaluate_run(log, result)
    method = "interventions" if args.interventions else "baseline"
    row = _csv_row(log.scenario_name, log.seed, method, m)
    if args.metrics:
        with open(args.metrics, "w") as fh:
            fh.write(CSV_HEADER + "\n" + row + "\n")
    if args.traj:
        metrics.write_tum(args.traj, result.trajectory)
    print(CSV_HEADER)
    print(row)
    for time, reason in result.report.failed_interventions:
        print(f"failed intervention at t={time}: {reason}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    est = metrics.read_tum(args.est)
    gt = metrics.read_tum(args.gt)
    value = metrics.ate(est, gt, align=not args.no_align)
    print(f"{value:.6f}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import asyncio

    scenario = simulator.resolve_scenario(args.scenario)
    log = simulator.simulate(scenario, seed=args.seed)
    ui_dir = args.ui
    if ui_dir is None:
        repo_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
        candidates = [os.path.join(os.getcwd(), "frontend", "dist"),
                      os.path.join(repo_root, "frontend", "dist")]
        ui_dir = next((c for c in candidates if os.path.isdir(c)), None)
    session = service.LiveSession(log, _pipeline_options(args, False),
                                  speed=args.speed, ui_dir=ui_dir)
    try:
        asyncio.run(session.run(port=args.port))
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s]


def cmd_compare(args) -> int:
    scenario = simulator.resolve_scenario(args.scenario)
    seeds = _parse_seeds(args.seeds)
    rows = []
    table = []
    for seed in seeds:
        log = simulator.simulate(scenario, seed=seed)
        per_method = {}
        for method, interventions in (("baseline", False), ("interventions", True)):
            result = simulator.run_pipeline(log, _pipeline_options(args, interventions))
            if result.report.diverged:
                print(f"seed {seed} {method}: diverged", file=sys.stderr)
                return EXIT_DIVERGED
            m = simulator.evaluate_run(log, result)
            rows.append(_csv_row(scenario.name, seed, method, m))
            per_method[method] = m
        table.append((seed, per_method))

    if args.metrics:
        with open(args.metrics, "w") as fh:
            fh.write(CSV_HEADER + "\n")
            fh.write("\n".join(rows) + "\n")

    print(f"{'seed':>6} {'ate_base':>10} {'ate_hitl':>10} {'rmse_base':>10} {'rmse_hitl':>10} "
          f"{'rec_base':>9} {'rec_hitl':>9}")
    for seed, pm in table:
        b, h = pm["baseline"], pm["interventions"]
        print(f"{seed:>6} {b['ate_m']:>10.4f} {h['ate_m']:>10.4f} {b['map_rmse_m']:>10.4f} "
              f"{h['map_rmse_m']:>10.4f} {b['recall']:>9.2f} {h['recall']:>9.2f}")
    mean = lambda key, method: sum(pm[method][key] for _, pm in table) / len(table)
    print(f"{'mean':>6} {mean('ate_m', 'baseline'):>10.4f} {mean('ate_m', 'interventions'):>10.4f} "
          f"{mean('map_rmse_m', 'baseline'):>10.4f} {mean('map_rmse_m', 'interventions'):>10.4f} "
          f"{mean('recall', 'baseline'):>9.2f} {mean('recall', 'interventions'):>9.2f}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="hitl-sgraph", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim", help="simulate a scenario into a sensor log")
    p.add_argument("--scenario", required=True, help="scenario file or builtin name")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("run", help="run the headless pipeline on a log")
    p.add_argument("--log", required=True)
    p.add_argument("--interventions", action="store_true")
    p.add_argument("--kappa", type=float, default=10.0, help="human room information weight")
    p.add_argument("--no-auto-detect", action="store_true")
    p.add_argument("--optimize-every", type=int, default=4, dest="optimize_every")
    p.add_argument("--metrics", default=None, help="CSV output path")
    p.add_argument("--traj", default=None, help="TUM trajectory output path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="print ATE between two TUM trajectories")
    p.add_argument("--est", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--no-align", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="serve a live session for UI clients")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--port", type=int, default=service.DEFAULT_PORT)
    p.add_argument("--speed", type=float, default=1.0, help="0 = step on command (GET /step)")
    p.add_argument("--kappa", type=float, default=10.0)
    p.add_argument("--optimize-every", type=int, default=1, dest="optimize_every")
    p.add_argument("--ui", default=None, help="directory of built UI assets")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("compare", help="paired baseline vs interventions over seeds")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seeds", required=True, help="e.g. 1..5 or 1,2,3")
    p.add_argument("--kappa", type=float, default=10.0)
    p.add_argument("--optimize-every", type=int, default=4, dest="optimize_every")
    p.add_argument("--metrics", default=None, help="CSV output path")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("HITL_SGRAPH_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (simulator.ScenarioError, metrics.MetricsError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
