"""Driving scenarios, planning problems and the geometric queries the planner needs.

Scenarios are stored in a small JSON schema::

    {
      "dt": 0.1, "horizon": 33,
      "lanelets": [{"centerline": [[x, y], ...], "width": 3.5}],
      "obstacles": [{"length": 4.5, "width": 1.8, "poses": [[x, y, theta], ...]}],
      "planning_problem": {
        "initial_state": {"x": 0, "y": 0, "orientation": 0, "velocity": 8, "steering_angle": 0},
        "goal": {"center": [x, y], "half_extents": [hx, hy], "time_interval": [a, b],
                 "velocity_interval": [lo, hi], "orientation_interval": [lo, hi]}
      }
    }

``velocity_interval`` and ``orientation_interval`` are optional.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .geometry import angle_diff, point_segment_distance, wrap_angle

GOAL_TOLERANCE = 1e-9


class ScenarioError(ValueError):
    """Raised when a scenario file or object violates the schema or an invariant."""


class NoLaneInformation(ScenarioError):
    """The scenario has no lanelets, so lane-relative offsets are undefined."""


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    orientation: float
    velocity: float
    steering_angle: float = 0.0
    time_step: int = 0

    def __post_init__(self):
        object.__setattr__(self, "orientation", wrap_angle(self.orientation))
        if self.velocity < 0.0:
            raise ScenarioError(f"velocity must be non-negative, got {self.velocity}")
        if self.time_step < 0:
            raise ScenarioError(f"time_step must be non-negative, got {self.time_step}")

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "orientation": self.orientation,
            "velocity": self.velocity,
            "steering_angle": self.steering_angle,
            "time_step": self.time_step,
        }


@dataclass(frozen=True)
class Trajectory:
    states: tuple[VehicleState, ...]
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        if not self.states:
            raise ScenarioError("trajectory must contain at least one state")
        if self.dt <= 0:
            raise ScenarioError("trajectory dt must be positive")
        for prev, cur in zip(self.states, self.states[1:]):
            if cur.time_step != prev.time_step + 1:
                raise ScenarioError(
                    f"time steps must increase by one, got {prev.time_step} -> {cur.time_step}"
                )

    def __len__(self) -> int:
        return len(self.states)

    @property
    def duration(self) -> float:
        return (len(self.states) - 1) * self.dt

    def to_dict(self) -> dict:
        return {"dt": self.dt, "states": [s.to_dict() for s in self.states]}

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        try:
            states = [VehicleState(**s) for s in data["states"]]
            return cls(tuple(states), float(data["dt"]))
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"malformed trajectory: {exc}") from exc


def _ordered(interval, name):
    if interval is None:
        return None
    lo, hi = (float(v) for v in interval)
    if lo > hi:
        raise ScenarioError(f"{name} bounds out of order: [{lo}, {hi}]")
    return (lo, hi)


@dataclass(frozen=True)
class GoalRegion:
    center: tuple[float, float]
    half_extents: tuple[float, float]
    time_interval: tuple[int, int]
    velocity_interval: Optional[tuple[float, float]] = None
    orientation_interval: Optional[tuple[float, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "half_extents", tuple(float(h) for h in self.half_extents))
        if len(self.center) != 2 or len(self.half_extents) != 2:
            raise ScenarioError("goal center and half_extents need two coordinates")
        if min(self.half_extents) < 0:
            raise ScenarioError("goal half_extents must be non-negative")
        a, b = (int(t) for t in self.time_interval)
        if a > b:
            raise ScenarioError(f"goal time_interval out of order: [{a}, {b}]")
        object.__setattr__(self, "time_interval", (a, b))
        object.__setattr__(
            self, "velocity_interval", _ordered(self.velocity_interval, "velocity_interval")
        )
        object.__setattr__(
            self, "orientation_interval", _ordered(self.orientation_interval, "orientation_interval")
        )

    def contains(self, state: VehicleState) -> bool:
        """Closed-set membership of a single state."""
        a, b = self.time_interval
        if not a <= state.time_step <= b:
            return False
        if abs(state.x - self.center[0]) > self.half_extents[0] + GOAL_TOLERANCE:
            return False
        if abs(state.y - self.center[1]) > self.half_extents[1] + GOAL_TOLERANCE:
            return False
        if self.velocity_interval is not None:
            lo, hi = self.velocity_interval
            if not lo - GOAL_TOLERANCE <= state.velocity <= hi + GOAL_TOLERANCE:
                return False
        if self.orientation_interval is not None:
            lo, hi = self.orientation_interval
            theta = state.orientation
            candidates = (theta, theta + 2 * math.pi, theta - 2 * math.pi)
            if not any(lo - GOAL_TOLERANCE <= c <= hi + GOAL_TOLERANCE for c in candidates):
                return False
        return True

    def to_dict(self) -> dict:
        data = {
            "center": list(self.center),
            "half_extents": list(self.half_extents),
            "time_interval": list(self.time_interval),
        }
        if self.velocity_interval is not None:
            data["velocity_interval"] = list(self.velocity_interval)
        if self.orientation_interval is not None:
            data["orientation_interval"] = list(self.orientation_interval)
        return data


@dataclass(frozen=True)
class PlanningProblem:
    initial_state: VehicleState
    goal: GoalRegion

    def __post_init__(self):
        if self.initial_state.time_step != 0:
            raise ScenarioError("initial state must have time_step 0")


@dataclass(frozen=True)
class Lanelet:
    centerline: tuple[tuple[float, float], ...]
    width: float

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.centerline)
        if len(pts) < 2:
            raise ScenarioError("lanelet centerline needs at least two points")
        if self.width <= 0:
            raise ScenarioError("lanelet width must be positive")
        object.__setattr__(self, "centerline", pts)


@dataclass(frozen=True)
class Obstacle:
    length: float
    width: float
    poses: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ScenarioError("obstacle length and width must be positive")
        object.__setattr__(
            self, "poses", tuple((float(x), float(y), float(t)) for x, y, t in self.poses)
        )


@dataclass(frozen=True)
class Scenario:
    dt: float
    horizon: int
    lanelets: tuple[Lanelet, ...] = ()
    obstacles: tuple[Obstacle, ...] = ()
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ScenarioError("scenario dt must be positive")
        if self.horizon < 0:
            raise ScenarioError("scenario horizon must be non-negative")
        object.__setattr__(self, "lanelets", tuple(self.lanelets))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        for i, obs in enumerate(self.obstacles):
            if len(obs.poses) < self.horizon + 1:
                raise ScenarioError(
                    f"obstacles[{i}].poses covers {len(obs.poses)} time steps, "
                    f"needs {self.horizon + 1}"
                )


# --- file I/O -----------------------------------------------------------------


def _require(data: dict, key: str, where: str):
    if not isinstance(data, dict) or key not in data:
        raise ScenarioError(f"schema violation: missing field '{where}{key}'")
    return data[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"schema violation: field '{where}' must be a number")
    if not math.isfinite(value):
        raise ScenarioError(f"schema violation: field '{where}' must be finite")
    return float(value)


def _pair(value, where: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(f"schema violation: field '{where}' must be a pair")
    return (_number(value[0], f"{where}[0]"), _number(value[1], f"{where}[1]"))


def scenario_from_dict(data: dict) -> tuple[Scenario, PlanningProblem]:
    dt = _number(_require(data, "dt", ""), "dt")
    horizon_raw = _require(data, "horizon", "")
    if isinstance(horizon_raw, bool) or not isinstance(horizon_raw, int):
        raise ScenarioError("schema violation: field 'horizon' must be an integer")

    lanelets = []
    for i, raw in enumerate(_require(data, "lanelets", "")):
        where = f"lanelets[{i}]."
        pts = [_pair(p, f"{where}centerline[{j}]") for j, p in enumerate(_require(raw, "centerline", where))]
        lanelets.append(Lanelet(tuple(pts), _number(_require(raw, "width", where), f"{where}width")))

    obstacles = []
    for i, raw in enumerate(_require(data, "obstacles", "")):
        where = f"obstacles[{i}]."
        poses = []
        for j, pose in enumerate(_require(raw, "poses", where)):
            if not isinstance(pose, (list, tuple)) or len(pose) != 3:
                raise ScenarioError(f"schema violation: field '{where}poses[{j}]' must be [x, y, theta]")
            poses.append(tuple(_number(v, f"{where}poses[{j}]") for v in pose))
        if len(poses) < horizon_raw + 1:
            raise ScenarioError(
                f"schema violation: field '{where}poses' covers {len(poses)} time steps, "
                f"needs {horizon_raw + 1}"
            )
        obstacles.append(
            Obstacle(
                _number(_require(raw, "length", where), f"{where}length"),
                _number(_require(raw, "width", where), f"{where}width"),
                tuple(poses),
            )
        )

    pp = _require(data, "planning_problem", "")
    init = _require(pp, "initial_state", "planning_problem.")
    where = "planning_problem.initial_state."
    initial = VehicleState(
        x=_number(_require(init, "x", where), where + "x"),
        y=_number(_require(init, "y", where), where + "y"),
        orientation=_number(_require(init, "orientation", where), where + "orientation"),
        velocity=_number(_require(init, "velocity", where), where + "velocity"),
        steering_angle=_number(init.get("steering_angle", 0.0), where + "steering_angle"),
        time_step=0,
    )
    g = _require(pp, "goal", "planning_problem.")
    where = "planning_problem.goal."
    ti = _require(g, "time_interval", where)
    if not isinstance(ti, (list, tuple)) or len(ti) != 2 or not all(
        isinstance(t, int) and not isinstance(t, bool) for t in ti
    ):
        raise ScenarioError(f"schema violation: field '{where}time_interval' must be two integers")
    goal = GoalRegion(
        center=_pair(_require(g, "center", where), where + "center"),
        half_extents=_pair(_require(g, "half_extents", where), where + "half_extents"),
        time_interval=(ti[0], ti[1]),
        velocity_interval=_pair(g["velocity_interval"], where + "velocity_interval")
        if g.get("velocity_interval") is not None
        else None,
        orientation_interval=_pair(g["orientation_interval"], where + "orientation_interval")
        if g.get("orientation_interval") is not None
        else None,
    )
    scenario = Scenario(dt, horizon_raw, tuple(lanelets), tuple(obstacles), name=str(data.get("name", "")))
    return scenario, PlanningProblem(initial, goal)


def scenario_to_dict(scenario: Scenario, problem: PlanningProblem) -> dict:
    init = problem.initial_state
    data = {
        "dt": scenario.dt,
        "horizon": scenario.horizon,
        "lanelets": [
            {"centerline": [list(p) for p in ln.centerline], "width": ln.width}
            for ln in scenario.lanelets
        ],
        "obstacles": [
            {"length": ob.length, "width": ob.width, "poses": [list(p) for p in ob.poses]}
            for ob in scenario.obstacles
        ],
        "planning_problem": {
            "initial_state": {
                "x": init.x,
                "y": init.y,
                "orientation": init.orientation,
                "velocity": init.velocity,
                "steering_angle": init.steering_angle,
            },
            "goal": problem.goal.to_dict(),
        },
    }
    if scenario.name:
        data["name"] = scenario.name
    return data


def load_scenario(path) -> tuple[Scenario, PlanningProblem]:
    """Load and validate a scenario file. I/O errors propagate as ``OSError``."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"schema violation: invalid JSON ({exc})") from exc
    return scenario_from_dict(data)


def save_scenario(scenario: Scenario, problem: PlanningProblem, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario, problem), indent=2))


# --- queries ------------------------------------------------------------------


def goal_reached(traj: Trajectory | Sequence[VehicleState], goal: GoalRegion) -> bool:
    states = traj.states if isinstance(traj, Trajectory) else traj
    return any(goal.contains(s) for s in states)


def distance_to_goal(state: VehicleState, goal: GoalRegion) -> float:
    return math.hypot(state.x - goal.center[0], state.y - goal.center[1])


def lane_offsets(state: VehicleState, scenario: Scenario) -> tuple[float, float]:
    """Lateral distance and heading offset to the nearest centerline segment."""
    if not scenario.lanelets:
        raise NoLaneInformation("scenario has no lanelets")
    best = None
    for lanelet in scenario.lanelets:
        pts = lanelet.centerline
        for (ax, ay), (bx, by) in zip(pts, pts[1:]):
            d = point_segment_distance(state.x, state.y, ax, ay, bx, by)
            if best is None or d < best[0]:
                best = (d, math.atan2(by - ay, bx - ax))
    dist, heading = best
    return dist, angle_diff(state.orientation, heading)
