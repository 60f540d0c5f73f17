"""Trajectory cost components, the weighted objective and before/after comparisons."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

from .scenario import NoLaneInformation, PlanningProblem, Scenario, Trajectory, lane_offsets

COMPONENTS = ("J_A", "J_SA", "J_SR", "J_LC", "J_O", "J_V")
COMPONENT_NAMES = {
    "J_A": "acceleration",
    "J_SA": "steering angle",
    "J_SR": "steering rate",
    "J_LC": "distance to the lane centerline",
    "J_O": "orientation offset to the lane centerline",
    "J_V": "velocity offset",
}


@dataclass(frozen=True)
class CostWeights:
    w_A: float = 50.0
    w_SA: float = 50.0
    w_SR: float = 50.0
    w_LC: float = 1.0
    w_O: float = 50.0
    w_V: float = 20.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"weight {name} must be non-negative")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.w_A, self.w_SA, self.w_SR, self.w_LC, self.w_O, self.w_V)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CostBreakdown:
    J_A: float = 0.0
    J_SA: float = 0.0
    J_SR: float = 0.0
    J_LC: float = 0.0
    J_O: float = 0.0
    J_V: float = 0.0
    total: Optional[float] = None

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in COMPONENTS)

    def components(self) -> dict:
        return {c: getattr(self, c) for c in COMPONENTS}

    def weighted(self, weights: CostWeights) -> "CostBreakdown":
        return CostBreakdown(*self.as_tuple(), total=aggregate(self, weights))


def compute_partial_costs(
    traj: Trajectory, scenario: Scenario, problem: PlanningProblem
) -> CostBreakdown:
    """Unweighted cost components as rectangle-rule integrals at the trajectory dt."""
    dt = traj.dt
    states = traj.states
    pairs = list(zip(states, states[1:]))

    j_a = sum(((b.velocity - a.velocity) / dt) ** 2 * dt for a, b in pairs)
    j_sa = sum(s.steering_angle**2 * dt for s in states)
    j_sr = sum(((b.steering_angle - a.steering_angle) / dt) ** 2 * dt for a, b in pairs)

    j_lc = j_o = 0.0
    if scenario.lanelets:
        for s in states:
            lateral, heading = lane_offsets(s, scenario)
            j_lc += lateral**2 * dt
            j_o += heading**2 * dt

    j_v = 0.0
    vi = problem.goal.velocity_interval
    if vi is not None:
        v_des = 0.5 * (vi[0] + vi[1])
        j_v = sum((s.velocity - v_des) ** 2 * dt for s in states)

    return CostBreakdown(j_a, j_sa, j_sr, j_lc, j_o, j_v)


def aggregate(breakdown: CostBreakdown, weights: CostWeights) -> float:
    return sum(w * j for w, j in zip(weights.as_tuple(), breakdown.as_tuple()))


def evaluate(
    traj: Trajectory,
    scenario: Scenario,
    problem: PlanningProblem,
    weights: Optional[CostWeights] = None,
) -> CostBreakdown:
    """Components plus the weighted total."""
    weights = weights or CostWeights()
    return compute_partial_costs(traj, scenario, problem).weighted(weights)


def evaluation_report(breakdown: CostBreakdown, weights: CostWeights) -> dict:
    return {
        "components": breakdown.components(),
        "weights": weights.to_dict(),
        "total": aggregate(breakdown, weights),
    }


@dataclass(frozen=True)
class ComparisonReport:
    component_deltas: dict
    total_before: float
    total_after: float
    total_delta: float
    relative_decrement: float
    improvement: bool
    zero_baseline: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def compare(
    before: tuple[CostBreakdown, float], after: tuple[CostBreakdown, float]
) -> ComparisonReport:
    (b_parts, j_before), (a_parts, j_after) = before, after
    deltas = {c: getattr(a_parts, c) - getattr(b_parts, c) for c in COMPONENTS}
    zero = j_before == 0
    decrement = 0.0 if zero else (j_before - j_after) / j_before
    return ComparisonReport(
        component_deltas=deltas,
        total_before=j_before,
        total_after=j_after,
        total_delta=j_after - j_before,
        relative_decrement=decrement,
        improvement=j_after < j_before,
        zero_baseline=zero,
    )


__all__ = [
    "COMPONENTS",
    "COMPONENT_NAMES",
    "ComparisonReport",
    "CostBreakdown",
    "CostWeights",
    "NoLaneInformation",
    "aggregate",
    "compare",
    "compute_partial_costs",
    "evaluate",
    "evaluation_report",
]
