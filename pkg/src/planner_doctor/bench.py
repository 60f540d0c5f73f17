"""Repeated repair sessions, the unbiased pass@k estimator and ablation switches."""

from __future__ import annotations

import json
import logging
import math
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from .llm import Backend, MockBackend, load_script
from .planner import PlannerConfig
from .repair import InitialPlanFailure, SessionParams, run_session
from .scenario import load_scenario

logger = logging.getLogger(__name__)

ABLATIONS = ("full", "no_few_shots", "no_feedback")


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased pass@k: ``1 - C(n-c, k) / C(n, k)``.

    Evaluated as the exact rational product ``prod_{i=n-c+1}^{n} (1 - k/i)``,
    which never forms a binomial coefficient, then rounded once to float.
    """
    if not 0 <= c <= n:
        raise ValueError(f"need 0 <= c <= n, got n={n}, c={c}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    if c == 0:
        return 0.0
    if n - c < k:
        return 1.0
    miss = Fraction(1)
    for i in range(n - c + 1, n + 1):
        miss *= Fraction(i - k, i)
    return float(1 - miss)


@dataclass(frozen=True)
class BenchmarkCase:
    case_id: str
    scenario_path: Path
    initial_config: PlannerConfig
    j_target: float
    mock_scripts: tuple[Path, ...] = ()


def load_manifest(path) -> list[BenchmarkCase]:
    """Read a JSON list of cases; relative paths resolve against the manifest's folder."""
    path = Path(path)
    base = path.parent
    cases = []
    for i, raw in enumerate(json.loads(path.read_text())):
        try:
            if "heuristic_file" in raw:
                heuristic = (base / raw["heuristic_file"]).read_text()
            else:
                heuristic = raw["heuristic"]
            cases.append(
                BenchmarkCase(
                    case_id=str(raw["case_id"]),
                    scenario_path=base / raw["scenario"],
                    initial_config=PlannerConfig.from_text(heuristic, raw["motion_primitives_id"]),
                    j_target=float(raw["target"]),
                    mock_scripts=tuple(base / s for s in raw.get("mock_scripts", [])),
                )
            )
        except KeyError as exc:
            raise ValueError(f"manifest entry {i} lacks field {exc}") from exc
    return cases


@dataclass
class PassAtKReport:
    ablation: str
    per_case: dict  # case_id -> (n, c)
    pass_at_k: dict  # k -> averaged estimate
    decrement_avg: float
    decrement_stddev: float
    decrements: list = field(default_factory=list)
    excluded: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ablation": self.ablation,
            "cases": {cid: {"n": n, "c": c} for cid, (n, c) in self.per_case.items()},
            "pass_at_k": {f"pass@{k}": v for k, v in self.pass_at_k.items()},
            "decrement_avg": self.decrement_avg,
            "decrement_stddev": self.decrement_stddev,
            "excluded": list(self.excluded),
        }


BackendFactory = Callable[[BenchmarkCase, int], Backend]


def scripted_backend_factory(case: BenchmarkCase, seed: int) -> MockBackend:
    """Mock backend whose script is chosen by ``seed`` among the case's scripts."""
    if not case.mock_scripts:
        raise ValueError(f"case {case.case_id} has no mock scripts")
    return MockBackend(load_script(case.mock_scripts[seed % len(case.mock_scripts)]))


def run_benchmark(
    cases: Sequence[BenchmarkCase],
    samples_per_case: int,
    k_values: Sequence[int],
    ablation: str,
    backend_factory: BackendFactory,
    *,
    epsilon: float = 10.0,
    token_limit: int = 8000,
    max_iterations: int = 10,
) -> PassAtKReport:
    if ablation not in ABLATIONS:
        raise ValueError(f"unknown ablation {ablation!r}; choose from {', '.join(ABLATIONS)}")
    if samples_per_case < max(k_values):
        raise ValueError("samples_per_case must be at least max(k_values)")
    if ablation == "no_feedback":
        max_iterations = 1

    per_case = {}
    decrements = []
    excluded = []
    for case in cases:
        scenario, problem = load_scenario(case.scenario_path)
        params = SessionParams(case.j_target, epsilon, token_limit, max_iterations)
        passes = 0
        case_decrements = []
        try:
            for seed in range(samples_per_case):
                outcome = run_session(
                    scenario,
                    problem,
                    case.initial_config,
                    params,
                    backend_factory(case, seed),
                    few_shots=ablation != "no_few_shots",
                    feedback=ablation != "no_feedback",
                )
                if outcome.j_min < outcome.j_initial:
                    passes += 1
                    case_decrements.append(outcome.relative_decrement)
        except InitialPlanFailure as exc:
            logger.warning("excluding case %s: %s", case.case_id, exc)
            excluded.append(case.case_id)
            continue
        per_case[case.case_id] = (samples_per_case, passes)
        decrements.extend(case_decrements)

    estimates = {}
    for k in k_values:
        values = [pass_at_k(n, c, k) for n, c in per_case.values()]
        estimates[k] = math.fsum(values) / len(values) if values else 0.0
    avg = statistics.fmean(decrements) if decrements else 0.0
    std = statistics.pstdev(decrements) if decrements else 0.0
    return PassAtKReport(ablation, per_case, estimates, avg, std, decrements, excluded)
