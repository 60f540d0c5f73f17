"""The closed diagnose-and-repair loop.

One session plans with the initial planner, evaluates the trajectory, builds the
diagnostic prompt and then iterates query -> patch -> re-plan -> re-evaluate ->
feedback while the token budget lasts and the best objective is more than
``epsilon`` above the target. Patches always apply to the initial planner
configuration. Any failure inside an iteration becomes feedback for the next
one; only a failing initial plan aborts the session.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .evaluation import CostBreakdown, CostWeights, compare, evaluate
from .heuristic import HeuristicError, parse_heuristic
from .llm import (
    DEFAULT_TOKEN_LIMIT,
    Backend,
    DiagnosisResult,
    LlmParams,
    ResponseError,
    TokenBudget,
    TokenLimitExceeded,
    parse_response,
    query,
)
from .planner import PlannerConfig, PlanningError, plan
from .primitives import MalformedId, parse_primitive_id
from .prompts import FeedbackRecord, PromptBundle, add_feedback, build_prompt
from .scenario import PlanningProblem, Scenario

logger = logging.getLogger(__name__)

APPLIED, PARSE_ERROR, PLAN_FAILED = "applied", "parse_error", "plan_failed"
TARGET_REACHED, TOKEN_LIMIT, MAX_ITERATIONS = "target_reached", "token_limit", "max_iterations"


class InitialPlanFailure(RuntimeError):
    pass


class PatchError(ValueError):
    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location
        self.message = message


@dataclass(frozen=True)
class SessionParams:
    j_target: float
    epsilon: float = 10.0
    token_limit: int = DEFAULT_TOKEN_LIMIT
    max_iterations: int = 10

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.token_limit <= 0 or self.max_iterations <= 0:
            raise ValueError("token_limit and max_iterations must be positive")


@dataclass
class IterationRecord:
    index: int
    diagnosis: Optional[DiagnosisResult]
    patch_outcome: str
    j_rep: Optional[float]
    j_min: float
    feedback: FeedbackRecord
    tokens_after: int
    error: Optional[str] = None
    config: Optional[PlannerConfig] = None
    breakdown: Optional[CostBreakdown] = None

    def to_dict(self) -> dict:
        return {
            "type": "iteration",
            "index": self.index,
            "diagnosis": self.diagnosis.to_dict() if self.diagnosis else None,
            "patch_outcome": self.patch_outcome,
            "error": self.error,
            "J_rep": self.j_rep,
            "J_min": self.j_min,
            "components": self.breakdown.components() if self.breakdown else None,
            "config": self.config.to_dict() if self.config else None,
            "feedback": self.feedback.to_dict(),
            "tokens_after": self.tokens_after,
        }


@dataclass
class SessionOutcome:
    j_initial: float
    j_min: float
    best_config: Optional[PlannerConfig]
    best_diagnoses: Optional[tuple[tuple[str, str], ...]]
    stop_reason: str
    log: list[IterationRecord] = field(default_factory=list)
    initial_breakdown: Optional[CostBreakdown] = None
    tokens_consumed: int = 0
    best_iteration: Optional[int] = None
    final_prompt: Optional[PromptBundle] = field(default=None, repr=False)

    @property
    def improved(self) -> bool:
        return self.j_min < self.j_initial

    @property
    def relative_decrement(self) -> float:
        if self.j_initial == 0:
            return 0.0
        return (self.j_initial - self.j_min) / self.j_initial

    def to_dict(self) -> dict:
        return {
            "type": "outcome",
            "J_initial": self.j_initial,
            "J_min": self.j_min,
            "stop_reason": self.stop_reason,
            "best_iteration": self.best_iteration,
            "best_config": self.best_config.to_dict() if self.best_config else None,
            "best_diagnoses": [list(p) for p in self.best_diagnoses] if self.best_diagnoses else None,
            "iterations": len(self.log),
            "tokens_consumed": self.tokens_consumed,
        }


def apply_patch(config: PlannerConfig, result: DiagnosisResult) -> PlannerConfig:
    """New planner configuration from a patch payload; ``config`` is left untouched."""
    try:
        heuristic = parse_heuristic(result.patched_heuristic)
    except HeuristicError as exc:
        raise PatchError("patched_heuristic", str(exc)) from exc
    try:
        pid = parse_primitive_id(result.primitive_set_id)
    except MalformedId as exc:
        raise PatchError("motion_primitives_id", str(exc)) from exc
    return PlannerConfig(heuristic, pid, config.max_expansions, result.patched_heuristic.strip())


def _lenient_diagnoses(raw: str) -> tuple[tuple[str, str], ...]:
    """Best-effort diagnosis pairs from a reply that failed schema validation."""
    try:
        data = json.loads(raw)
        return tuple(
            (str(d["diagnosis"]), str(d["prescription"]))
            for d in data.get("diagnoses", [])
            if isinstance(d, dict) and "diagnosis" in d and "prescription" in d
        )
    except (ValueError, AttributeError, TypeError):
        return ()


def run_session(
    scenario: Scenario,
    problem: PlanningProblem,
    initial_config: PlannerConfig,
    params: SessionParams,
    backend: Backend,
    *,
    llm_params: Optional[LlmParams] = None,
    weights: Optional[CostWeights] = None,
    few_shots: bool = True,
    feedback: bool = True,
    prompt_options: Optional[dict] = None,
) -> SessionOutcome:
    weights = weights or CostWeights()
    llm_params = llm_params or LlmParams(token_limit=params.token_limit)
    budget = TokenBudget(params.token_limit)

    try:
        initial = plan(scenario, problem, initial_config)
    except (PlanningError, ValueError) as exc:
        raise InitialPlanFailure(f"initial planner fails on the problem: {exc}") from exc
    breakdown0 = evaluate(initial.trajectory, scenario, problem, weights)
    j_initial = breakdown0.total
    bundle = build_prompt(
        initial_config, breakdown0, j_initial, params.j_target, weights,
        few_shots=few_shots, **(prompt_options or {}),
    )

    j_min = j_initial
    best_config = None
    best_diagnoses = None
    best_iteration = None
    log: list[IterationRecord] = []

    while True:
        if j_min - params.j_target <= params.epsilon:
            stop = TARGET_REACHED
            break
        if budget.exhausted:
            stop = TOKEN_LIMIT
            break
        if len(log) >= params.max_iterations:
            stop = MAX_ITERATIONS
            break
        index = len(log) + 1
        try:
            raw = query(bundle, llm_params, backend, budget)
        except TokenLimitExceeded as exc:
            logger.info("iteration %d: %s", index, exc)
            stop = TOKEN_LIMIT
            break

        result = None
        config = None
        breakdown = None
        j_rep = None
        error = None
        try:
            result = parse_response(raw)
            config = apply_patch(initial_config, result)
        except ResponseError as exc:
            outcome, error = PARSE_ERROR, str(exc)
            fb = FeedbackRecord.execution_error(_lenient_diagnoses(raw), "the response", error)
        except PatchError as exc:
            outcome, error = PARSE_ERROR, str(exc)
            fb = FeedbackRecord.execution_error(result.pairs, exc.location, exc.message)
        else:
            try:
                replanned = plan(scenario, problem, config)
            except (PlanningError, ValueError) as exc:
                outcome, error = PLAN_FAILED, f"{type(exc).__name__}: {exc}"
                fb = FeedbackRecord.execution_error(result.pairs, "the repaired planner", error)
            else:
                outcome = APPLIED
                breakdown = evaluate(replanned.trajectory, scenario, problem, weights)
                j_rep = breakdown.total
                report = compare((breakdown0, j_initial), (breakdown, j_rep))
                fb = FeedbackRecord.evaluation(result.pairs, report)

        if feedback:
            bundle = add_feedback(bundle, fb)
        if j_rep is not None and j_rep < j_min:
            j_min, best_config, best_diagnoses, best_iteration = j_rep, config, result.pairs, index
        logger.info("iteration %d: %s, J_rep=%s, J_min=%.4f", index, outcome, j_rep, j_min)
        log.append(
            IterationRecord(index, result, outcome, j_rep, j_min, fb, budget.consumed, error, config, breakdown)
        )

    return SessionOutcome(
        j_initial=j_initial,
        j_min=j_min,
        best_config=best_config,
        best_diagnoses=best_diagnoses,
        stop_reason=stop,
        log=log,
        initial_breakdown=breakdown0,
        tokens_consumed=budget.consumed,
        best_iteration=best_iteration,
        final_prompt=bundle,
    )


def write_session_log(outcome: SessionOutcome, path) -> None:
    lines = [json.dumps(rec.to_dict()) for rec in outcome.log]
    lines.append(json.dumps(outcome.to_dict()))
    Path(path).write_text("\n".join(lines) + "\n")


def read_session_log(path) -> tuple[list[dict], dict]:
    entries = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
    return entries[:-1], entries[-1]
