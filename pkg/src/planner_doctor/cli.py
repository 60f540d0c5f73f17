"""Command-line entry point: plan, evaluate, describe, repair and bench.

Exit codes: 0 on success, 1 on a domain error (bad heuristic, no plan, ...),
2 on usage or file errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import data_path
from .bench import ABLATIONS, load_manifest, run_benchmark, scripted_backend_factory
from .evaluation import CostWeights, evaluate, evaluation_report
from .llm import HttpBackend, LlmError, LlmParams, MockBackend
from .planner import PlannerConfig, PlanningError, plan
from .prompts import build_prompt
from .repair import InitialPlanFailure, SessionParams, run_session, write_session_log
from .scenario import Trajectory, load_scenario

log = logging.getLogger("planner_doctor")

DEFAULT_PRIMITIVES = "V_0.0_20.0_Vstep_4.0_SA_-1.066_1.066_SAstep_0.18_T_0.5_Model_BMW_320i"
EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _config(args) -> PlannerConfig:
    text = Path(args.heuristic).read_text()
    return PlannerConfig.from_text(text, args.primitives, args.max_expansions)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _summary(breakdown) -> str:
    lines = [f"{name:5s} {value:14.6f}" for name, value in breakdown.components().items()]
    lines.append(f"{'J':5s} {breakdown.total:14.6f}")
    return "\n".join(lines)


def cmd_plan(args) -> int:
    scenario, problem = load_scenario(args.scenario)
    result = plan(scenario, problem, _config(args))
    breakdown = evaluate(result.trajectory, scenario, problem)
    _emit(json.dumps(result.trajectory.to_dict(), indent=2) + "\n", args.out)
    # keep stdout clean for the trajectory when it is printed there
    stream = sys.stdout if args.out else sys.stderr
    print(f"{len(result.trajectory)} states, {result.expansions} expansions", file=stream)
    print(_summary(breakdown), file=stream)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    scenario, problem = load_scenario(args.scenario)
    traj = Trajectory.from_dict(json.loads(Path(args.trajectory).read_text()))
    weights = CostWeights()
    breakdown = evaluate(traj, scenario, problem, weights)
    print(json.dumps(evaluation_report(breakdown, weights), indent=2))
    return EXIT_OK


def cmd_describe(args) -> int:
    scenario, problem = load_scenario(args.scenario)
    config = _config(args)
    result = plan(scenario, problem, config)
    weights = CostWeights()
    breakdown = evaluate(result.trajectory, scenario, problem, weights)
    bundle = build_prompt(config, breakdown, breakdown.total, args.target, weights, few_shots=not args.no_few_shots)
    _emit(bundle.full_text() + "\n", args.out)
    return EXIT_OK


def _backend(args):
    spec = args.backend
    if spec.startswith("mock:"):
        return MockBackend.from_file(spec[len("mock:"):])
    if spec == "http":
        if not args.endpoint:
            raise UsageError("--backend http needs --endpoint")
        return HttpBackend(args.endpoint, args.model)
    raise UsageError(f"unknown backend {spec!r}; use mock:PATH or http")


def cmd_repair(args) -> int:
    scenario, problem = load_scenario(args.scenario)
    config = _config(args)
    backend = _backend(args)
    params = SessionParams(args.target, args.epsilon, args.token_limit, args.max_iterations)
    llm_params = LlmParams(args.temperature, args.token_limit, args.model)
    outcome = run_session(
        scenario, problem, config, params, backend,
        llm_params=llm_params, few_shots=not args.no_few_shots, feedback=not args.no_feedback,
    )
    if args.log:
        write_session_log(outcome, args.log)
    print(json.dumps(outcome.to_dict(), indent=2))
    return EXIT_OK


def cmd_bench(args) -> int:
    cases = load_manifest(args.manifest)
    report = run_benchmark(
        cases, args.samples, args.k, args.ablation, scripted_backend_factory,
        epsilon=args.epsilon, token_limit=args.token_limit, max_iterations=args.max_iterations,
    )
    _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planner-doctor", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log session progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def planner_flags(p):
        p.add_argument("--scenario", default=str(data_path("intersection.json")))
        p.add_argument("--heuristic", default=str(data_path("initial_heuristic.txt")),
                       help="file holding the heuristic expression")
        p.add_argument("--primitives", default=DEFAULT_PRIMITIVES, help="motion primitive set ID")
        p.add_argument("--max-expansions", type=int, default=20000)

    def session_flags(p):
        p.add_argument("--epsilon", type=float, default=10.0)
        p.add_argument("--token-limit", type=int, default=8000)
        p.add_argument("--max-iterations", type=int, default=10)

    p = sub.add_parser("plan", help="plan a trajectory")
    planner_flags(p)
    p.add_argument("--out", help="trajectory JSON output (default: stdout)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("evaluate", help="evaluate a saved trajectory")
    p.add_argument("--scenario", default=str(data_path("intersection.json")))
    p.add_argument("--trajectory", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("describe", help="write the diagnostic prompt for a planner")
    planner_flags(p)
    p.add_argument("--target", type=float, required=True, help="desired objective value")
    p.add_argument("--no-few-shots", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("repair", help="run a diagnose-and-repair session")
    planner_flags(p)
    session_flags(p)
    p.add_argument("--target", type=float, required=True, help="desired objective value")
    p.add_argument("--backend", default="mock:" + str(data_path("case_study.jsonl")),
                   help="mock:SCRIPT.jsonl or http")
    p.add_argument("--endpoint", help="chat-completion URL for the http backend")
    p.add_argument("--model", default="mock")
    p.add_argument("--temperature", type=float, default=0.6)
    p.add_argument("--no-few-shots", action="store_true")
    p.add_argument("--no-feedback", action="store_true")
    p.add_argument("--log", help="session log JSONL output")
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("bench", help="pass@k over a case manifest with scripted backends")
    session_flags(p)
    p.add_argument("--manifest", default=str(data_path("bench/manifest.json")))
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--k", type=int, nargs="+", default=[1, 5, 10])
    p.add_argument("--ablation", choices=ABLATIONS, default="full")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, PlanningError, LlmError, InitialPlanFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
