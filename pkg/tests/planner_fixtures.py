"""Tiny planning instances small enough to enumerate every primitive sequence."""

import math
from dataclasses import dataclass

from planner_doctor.planner import collision_free
from planner_doctor.primitives import generate_primitive_set, parse_primitive_id, vehicle_model
from planner_doctor.scenario import GoalRegion, Obstacle, PlanningProblem, Scenario, VehicleState

VELOCITY_ONLY = "V_0.0_4.0_Vstep_2.0_SA_0.0_0.0_SAstep_0.1_T_0.5_Model_BMW_320i"
WITH_STEERING = "V_2.0_4.0_Vstep_2.0_SA_-0.1_0.1_SAstep_0.1_T_0.5_Model_BMW_320i"


@dataclass
class TinyCase:
    name: str
    scenario: Scenario
    problem: PlanningProblem
    primitive_id: str
    depth: int


def _obstacle(horizon, pose_at):
    return Obstacle(4.5, 1.8, tuple(pose_at(k) for k in range(horizon + 1)))


def tiny_cases() -> list:
    cases = []
    h = 20
    cases.append(TinyCase(
        "straight_goal_ahead",
        Scenario(0.1, h),
        PlanningProblem(VehicleState(0, 0, 0, 2.0), GoalRegion((6.0, 0.0), (0.5, 1.0), (0, h))),
        VELOCITY_ONLY, 4,
    ))
    cases.append(TinyCase(
        "late_time_window",
        Scenario(0.1, h),
        PlanningProblem(VehicleState(0, 0, 0, 2.0), GoalRegion((2.0, 0.0), (1.0, 1.0), (14, h))),
        VELOCITY_ONLY, 4,
    ))
    cases.append(TinyCase(
        "slow_lead_vehicle",
        Scenario(0.1, h, obstacles=(_obstacle(h, lambda k: (8.0 + 0.2 * k, 0.0, 0.0)),)),
        PlanningProblem(VehicleState(0, 0, 0, 2.0), GoalRegion((4.0, 0.0), (1.0, 1.0), (0, h))),
        VELOCITY_ONLY, 4,
    ))
    cases.append(TinyCase(
        "must_stop",
        Scenario(0.1, h),
        PlanningProblem(
            VehicleState(0, 0, 0, 4.0),
            GoalRegion((4.0, 0.0), (3.0, 1.0), (0, h), velocity_interval=(0.0, 0.5)),
        ),
        VELOCITY_ONLY, 4,
    ))
    cases.append(TinyCase(
        "start_at_rest",
        Scenario(0.1, h),
        PlanningProblem(VehicleState(1, 1, 0.3, 0.0), GoalRegion((4.0, 2.0), (1.0, 1.0), (0, h))),
        VELOCITY_ONLY, 4,
    ))
    cases.append(TinyCase(
        "lateral_offset",
        Scenario(0.1, 10),
        PlanningProblem(VehicleState(0, 0, 0, 2.0), GoalRegion((3.2, 0.12), (0.4, 0.02), (0, 10))),
        WITH_STEERING, 2,
    ))
    return cases


def _place(prim, anchor):
    c, s = math.cos(anchor.orientation), math.sin(anchor.orientation)
    return [
        VehicleState(
            anchor.x + c * p.x - s * p.y,
            anchor.y + s * p.x + c * p.y,
            anchor.orientation + p.orientation,
            p.velocity,
            p.steering_angle,
            anchor.time_step + p.time_step,
        )
        for p in prim.states
    ]


def brute_force(case: TinyCase):
    """Minimum time to the goal over all primitive sequences up to ``case.depth``.

    Returns (best_cost, number_of_sequences_enumerated).
    """
    pset = generate_primitive_set(parse_primitive_id(case.primitive_id), dt=case.scenario.dt)
    vehicle = vehicle_model("BMW_320i")
    goal = case.problem.goal
    init = case.problem.initial_state
    start = VehicleState(
        init.x, init.y, init.orientation,
        min(pset.velocity_samples, key=lambda v: abs(v - init.velocity)),
        min(pset.steering_samples, key=lambda v: abs(v - init.steering_angle)),
        0,
    )
    best = math.inf
    count = 0

    def extend(path, depth):
        nonlocal best, count
        if depth == case.depth:
            return
        end = path[-1]
        for prim in pset.primitives:
            if prim.v_start != end.velocity or prim.sa_start != end.steering_angle:
                continue
            count += 1
            new = [s for s in _place(prim, end)[1:] if s.time_step <= case.scenario.horizon]
            if not new:
                continue
            hit = next((i for i, s in enumerate(new) if goal.contains(s)), None)
            checked = new if hit is None else new[: hit + 1]
            if not collision_free(checked, case.scenario, vehicle):
                continue
            if hit is not None:
                best = min(best, new[hit].time_step * case.scenario.dt)
                continue
            if len(new) == len(prim.states) - 1:
                extend(path + new, depth + 1)

    if goal.contains(start):
        return 0.0, 0
    extend([start], 0)
    return best, count
