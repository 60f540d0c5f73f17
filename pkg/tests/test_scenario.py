import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planner_doctor import data_path
from planner_doctor.scenario import (
    GoalRegion,
    Lanelet,
    NoLaneInformation,
    PlanningProblem,
    Scenario,
    ScenarioError,
    Trajectory,
    VehicleState,
    distance_to_goal,
    goal_reached,
    lane_offsets,
    load_scenario,
    save_scenario,
    scenario_to_dict,
)

coord = st.floats(-50, 50, allow_nan=False)


def _open_field():
    return {
        "dt": 0.1,
        "horizon": 5,
        "lanelets": [],
        "obstacles": [],
        "planning_problem": {
            "initial_state": {"x": 0, "y": 0, "orientation": 0, "velocity": 0},
            "goal": {"center": [5, 0], "half_extents": [1, 1], "time_interval": [0, 5]},
        },
    }


def test_bundled_fixture_loads(fixture_scenario):
    scenario, problem = fixture_scenario
    assert scenario.dt == 0.1
    assert scenario.horizon == 33
    assert problem.initial_state.time_step == 0


def test_open_field_loads(tmp_path):
    path = tmp_path / "open.json"
    path.write_text(json.dumps(_open_field()))
    scenario, _ = load_scenario(path)
    assert scenario.lanelets == () and scenario.obstacles == ()


def test_short_obstacle_poses_rejected(tmp_path):
    data = _open_field()
    data["obstacles"] = [{"length": 4, "width": 2, "poses": [[0, 0, 0]] * 3}]
    path = tmp_path / "short.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ScenarioError, match="poses"):
        load_scenario(path)


def test_missing_field_is_named(tmp_path):
    data = _open_field()
    del data["horizon"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ScenarioError, match="horizon"):
        load_scenario(path)


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_scenario(tmp_path / "absent.json")


def test_round_trip(tmp_path, fixture_scenario):
    scenario, problem = fixture_scenario
    path = tmp_path / "copy.json"
    save_scenario(scenario, problem, path)
    again, problem2 = load_scenario(path)
    assert again == scenario
    assert problem2 == problem
    assert scenario_to_dict(again, problem2) == scenario_to_dict(scenario, problem)


def test_negative_velocity_rejected():
    with pytest.raises(ScenarioError):
        VehicleState(0, 0, 0, -1.0)


def test_trajectory_time_steps_must_increase():
    with pytest.raises(ScenarioError):
        Trajectory((VehicleState(0, 0, 0, 0, time_step=0), VehicleState(0, 0, 0, 0, time_step=2)), 0.1)


GOAL = GoalRegion((0.0, 0.0), (2.0, 1.0), (3, 5))


def test_goal_center_at_start_time():
    assert goal_reached([VehicleState(0, 0, 0, 1, time_step=3)], GOAL)


def test_goal_time_exclusion():
    assert not goal_reached([VehicleState(0, 0, 0, 1, time_step=6)], GOAL)


@pytest.mark.parametrize("x,y", [(2.0, 0.0), (-2.0, 1.0), (0.5, -1.0)])
def test_goal_boundary_is_closed(x, y):
    assert GOAL.contains(VehicleState(x, y, 0, 1, time_step=4))


def test_goal_optional_intervals():
    goal = GoalRegion((0, 0), (1, 1), (0, 1), velocity_interval=(2, 3), orientation_interval=(3.0, 3.3))
    assert goal.contains(VehicleState(0, 0, 3.2, 2.5))
    assert not goal.contains(VehicleState(0, 0, 3.2, 1.0))
    assert not goal.contains(VehicleState(0, 0, 0.0, 2.5))


@settings(max_examples=200)
@given(x=coord, y=coord, t=st.integers(0, 10), grow=st.floats(0, 5), grow_t=st.integers(0, 3))
def test_goal_monotone_in_size(x, y, t, grow, grow_t):
    state = VehicleState(x, y, 0, 1, time_step=t)
    small = GoalRegion((1.0, -2.0), (3.0, 2.0), (2, 6))
    big = GoalRegion((1.0, -2.0), (3.0 + grow, 2.0 + grow), (max(0, 2 - grow_t), 6 + grow_t))
    if small.contains(state):
        assert big.contains(state)


def test_distance_to_goal_examples():
    goal = GoalRegion((0, 0), (1, 1), (0, 0))
    assert distance_to_goal(VehicleState(0, 0, 0, 0), goal) == 0.0
    assert distance_to_goal(VehicleState(3, 4, 0, 0), goal) == 5.0


@given(x=coord, y=coord, cx=coord, cy=coord)
def test_distance_to_goal_formula(x, y, cx, cy):
    goal = GoalRegion((cx, cy), (1, 1), (0, 0))
    expected = ((x - cx) ** 2 + (y - cy) ** 2) ** 0.5
    assert abs(distance_to_goal(VehicleState(x, y, 0, 0), goal) - expected) < 1e-12


def _seg_dist(px, py, ax, ay, bx, by):
    # parametric projection, written independently of the library helper
    dx, dy = bx - ax, by - ay
    den = dx * dx + dy * dy
    t = 0.0 if den == 0 else max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / den))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


STRAIGHT = Scenario(0.1, 0, lanelets=(Lanelet(((0, 0), (10, 0)), 3.5),))


def test_lane_offsets_examples():
    assert lane_offsets(VehicleState(4, 0, 0, 1), STRAIGHT) == (0.0, 0.0)
    lat, head = lane_offsets(VehicleState(4, 2, 0, 1), STRAIGHT)
    assert lat == pytest.approx(2.0) and head == pytest.approx(0.0)
    _, head = lane_offsets(VehicleState(4, 0, math.pi, 1), STRAIGHT)
    assert head == pytest.approx(math.pi)


def test_lane_offsets_without_lanes():
    with pytest.raises(NoLaneInformation):
        lane_offsets(VehicleState(0, 0, 0, 0), Scenario(0.1, 0))


@settings(max_examples=100)
@given(
    pts=st.lists(st.tuples(coord, coord), min_size=2, max_size=101),
    x=coord,
    y=coord,
)
def test_lane_offsets_brute_force(pts, x, y):
    scenario = Scenario(0.1, 0, lanelets=(Lanelet(tuple(pts), 3.0),))
    lat, _ = lane_offsets(VehicleState(x, y, 0, 1), scenario)
    oracle = min(
        _seg_dist(x, y, ax, ay, bx, by) for (ax, ay), (bx, by) in zip(pts, pts[1:])
    )
    assert lat == pytest.approx(oracle, abs=1e-9)


def test_planning_problem_requires_time_zero():
    with pytest.raises(ScenarioError):
        PlanningProblem(VehicleState(0, 0, 0, 0, time_step=1), GOAL)


def test_bundled_file_exists():
    assert data_path("intersection.json").is_file()
