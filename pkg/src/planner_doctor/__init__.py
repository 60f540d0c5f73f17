"""Diagnose and repair heuristic-guided lattice motion planners with a language model in the loop."""

from importlib import resources
from pathlib import Path

from .bench import BenchmarkCase, PassAtKReport, load_manifest, pass_at_k, run_benchmark
from .evaluation import CostBreakdown, CostWeights, aggregate, compare, evaluate
from .heuristic import evaluate_heuristic, parse_heuristic, render_heuristic
from .llm import HttpBackend, LlmParams, MockBackend, parse_response
from .planner import PlannerConfig, plan
from .primitives import format_primitive_id, generate_primitive_set, parse_primitive_id
from .prompts import build_prompt
from .repair import SessionParams, run_session
from .scenario import Trajectory, load_scenario

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Path of a file shipped in the package's ``data`` folder."""
    return Path(str(resources.files(__package__) / "data" / name))


__all__ = [
    "BenchmarkCase",
    "CostBreakdown",
    "CostWeights",
    "HttpBackend",
    "LlmParams",
    "MockBackend",
    "PassAtKReport",
    "PlannerConfig",
    "SessionParams",
    "Trajectory",
    "aggregate",
    "build_prompt",
    "compare",
    "data_path",
    "evaluate",
    "evaluate_heuristic",
    "format_primitive_id",
    "generate_primitive_set",
    "load_manifest",
    "load_scenario",
    "parse_heuristic",
    "parse_primitive_id",
    "parse_response",
    "pass_at_k",
    "plan",
    "render_heuristic",
    "run_benchmark",
    "run_session",
]
