"""Command line: ``piperoute {solve,generate,benchmark,validate,export}``.

Exit codes: 0 success, 1 bad input or failed validation, 2 infeasible,
3 no solution within the limits.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .costs import EdgeCostTable
from .exact import ExactConfig, solve_exact
from .graph import build_routing_graph
from .heuristics import H1Config, H2Config, HeuristicFailure, run_h1, run_h2
from .instances import (
    RandomInstanceSpec,
    generate_random,
    load_run_config,
    load_scenario,
    load_solution,
    save_scenario,
    save_solution,
)
from .scenario import InfeasibleScenarioError, ScenarioError
from .validation import BenchmarkLimits, benchmark, export_geometry, validate

log = logging.getLogger("piperoute")

EXIT_OK, EXIT_BAD_INPUT, EXIT_INFEASIBLE, EXIT_NO_SOLUTION = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _schedule(text: str) -> tuple:
    try:
        parts = tuple(float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected par:cluster:seq") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected par:cluster:seq")
    return parts


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="piperoute", description="Pipe routing on 3D grids.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="route the services of a scenario file")
    s.add_argument("scenario")
    s.add_argument("--method", choices=("exact", "h1", "h2"))
    s.add_argument("--time-limit", type=float)
    s.add_argument("--node-limit", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int)
    s.add_argument("--maxit", type=int)
    s.add_argument("--schedule", type=_schedule, help="par:cluster:seq weights")
    s.add_argument("--delta-init", type=float)
    s.add_argument("--delta-step", type=float)
    s.add_argument("--fallback-density", type=int)
    s.add_argument("--out", default="solution.json")

    g = sub.add_parser("generate", help="write a random benchmark scenario")
    g.add_argument("--d", type=int, default=17)
    g.add_argument("--s", type=int, default=5)
    g.add_argument("--o", type=int, default=5)
    g.add_argument("--g", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="scenario.json")

    b = sub.add_parser("benchmark", help="run methods over a grid of random instances")
    b.add_argument("--d", type=_int_list, default=[17])
    b.add_argument("--s", type=_int_list, default=[2, 3, 4, 5])
    b.add_argument("--o", type=_int_list, default=[0, 5])
    b.add_argument("--g", type=_int_list, default=[1])
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--methods", default="exact,h1,h2")
    b.add_argument("--time-limit", type=float, default=60.0)
    b.add_argument("--node-limit", type=int)
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--maxit", type=int)
    b.add_argument("--schedule", type=_schedule)
    b.add_argument("--fallback-density", type=int)
    b.add_argument("--out", default="benchmark.csv")

    v = sub.add_parser("validate", help="check a solution against its scenario")
    v.add_argument("scenario")
    v.add_argument("solution")

    e = sub.add_parser("export", help="write routes and obstacles as Wavefront OBJ")
    e.add_argument("scenario")
    e.add_argument("solution", nargs="?")
    e.add_argument("--tubes", action="store_true", help="add a tube mesh per service")
    e.add_argument("--out", default="routes.obj")
    return p


def _h2_config(args, file_cfg: dict) -> H2Config:
    kw = dict(file_cfg.get("h2", {}))
    for flag, key in (("maxit", "maxit"), ("schedule", "schedule"), ("threads", "threads"),
                      ("fallback_density", "fallback_density")):
        val = getattr(args, flag, None)
        if val is not None:
            kw[key] = val
    if "schedule" in kw:
        kw["schedule"] = tuple(kw["schedule"])
    try:
        return H2Config(**kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad H2 settings: {exc}") from None


def _h1_config(args, file_cfg: dict, time_limit, node_limit) -> H1Config:
    kw = dict(file_cfg.get("h1", {}))
    if args.delta_init is not None:
        kw["delta"] = args.delta_init
    if args.delta_step is not None:
        kw["increment"] = args.delta_step
    kw.setdefault("time_limit", time_limit)
    kw.setdefault("node_limit", node_limit)
    kw.pop("init_sol", None)
    try:
        return H1Config(**kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad H1 settings: {exc}") from None


def cmd_solve(args) -> int:
    file_cfg = load_run_config(args.scenario)
    sc = load_scenario(args.scenario)
    method = args.method or file_cfg.get("method")
    if method not in ("exact", "h1", "h2"):
        raise UsageError("--method is required (exact, h1 or h2)")
    time_limit = args.time_limit if args.time_limit is not None else float(file_cfg.get("time_limit", 60.0))
    node_limit = args.node_limit if args.node_limit is not None else file_cfg.get("node_limit")

    out = Path(args.out)
    handler = logging.FileHandler(out.with_suffix(".log"), mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(message)s"))
    root = logging.getLogger("piperoute")
    root.addHandler(handler)
    try:
        g = build_routing_graph(sc)
        costs = EdgeCostTable(g, sc)
        if method == "exact":
            res = solve_exact(g, costs, sc.services, ExactConfig(time_limit=time_limit, node_limit=node_limit))
            if res.status == "Infeasible":
                log.error("model is infeasible")
                return EXIT_INFEASIBLE
            if res.solution is None:
                log.error("no incumbent within the limits (bound %.6g)", res.lower_bound)
                return EXIT_NO_SOLUTION
            sol = res.solution
            sol.meta.update(method="exact", lower_bound=res.lower_bound, nodes=res.nodes, gap=res.gap)
        elif method == "h2":
            sol = run_h2(g, costs, sc.services, _h2_config(args, file_cfg), scenario=sc)
        else:
            sol = run_h1(g, costs, sc.services, _h1_config(args, file_cfg, time_limit, node_limit))
        sol.meta["seed"] = args.seed
        report = validate(g, sc, costs, sol)
        sol.meta["validated"] = report.passed
        save_solution(sol, out, g, costs)
        print(f"{method}: objective {sol.objective:.10g} ({sol.status}); {report.summary()}")
        return EXIT_OK if report.passed else EXIT_BAD_INPUT
    except InfeasibleScenarioError as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except HeuristicFailure as exc:
        log.error("%s", exc)
        return EXIT_NO_SOLUTION
    finally:
        root.removeHandler(handler)
        handler.close()


def cmd_generate(args) -> int:
    try:
        spec = RandomInstanceSpec(d=args.d, s=args.s, o=args.o, g=args.g, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_scenario(generate_random(spec), args.out)
    print(f"wrote {args.out} ({spec.name})")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if set(methods) - {"exact", "h1", "h2"}:
        raise UsageError(f"unknown method in {args.methods!r}")
    try:
        specs = [
            RandomInstanceSpec(d=d, s=s, o=o, g=g, seed=args.seed)
            for d in args.d for s in args.s for o in args.o for g in args.g
        ]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    h2 = _h2_config(args, {}) if "h2" in methods else None
    limits = BenchmarkLimits(time_limit=args.time_limit, node_limit=args.node_limit, h2=h2)
    benchmark(specs, methods, limits, path=args.out)
    print(f"wrote {args.out} ({len(specs)} instances)")
    return EXIT_OK


def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    sol = load_solution(args.solution)
    g = build_routing_graph(sc, check_connected=False)
    report = validate(g, sc, EdgeCostTable(g, sc), sol)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_BAD_INPUT


def cmd_export(args) -> int:
    sc = load_scenario(args.scenario)
    sol = load_solution(args.solution) if args.solution else None
    info = export_geometry(sc, sol, args.out, tubes=args.tubes)
    print(f"wrote {args.out} ({len(info['objects'])} objects)")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "generate": cmd_generate,
    "benchmark": cmd_benchmark,
    "validate": cmd_validate,
    "export": cmd_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_BAD_INPUT
    level = logging.WARNING - 10 * min(args.verbose, 2)
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(level)
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    pkg = logging.getLogger("piperoute")
    pkg.addHandler(console)
    pkg.setLevel(min(level, logging.INFO))
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (OSError, ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    finally:
        pkg.removeHandler(console)


if __name__ == "__main__":
    sys.exit(main())
