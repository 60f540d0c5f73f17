"""A* search over a motion-primitive lattice."""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .geometry import rectangles_intersect
from .heuristic import HeuristicSpec, NodeContext, evaluate_heuristic, parse_heuristic
from .primitives import (
    PrimitiveSet,
    PrimitiveSetId,
    VehicleModelParams,
    cached_primitive_set,
    format_primitive_id,
    parse_primitive_id,
    transform_primitive,
    vehicle_model,
)
from .scenario import PlanningProblem, Scenario, Trajectory, VehicleState

logger = logging.getLogger(__name__)

POSITION_RESOLUTION = 0.1
ORIENTATION_RESOLUTION = 0.05
DEFAULT_MAX_EXPANSIONS = 20000


class PlanningError(Exception):
    pass


class NoSolution(PlanningError):
    pass


class InfeasibleStart(PlanningError):
    pass


class HorizonExceeded(PlanningError):
    pass


@dataclass(frozen=True)
class PlannerConfig:
    heuristic: HeuristicSpec
    primitive_set_id: PrimitiveSetId
    max_expansions: int = DEFAULT_MAX_EXPANSIONS
    heuristic_text: str = ""

    def __post_init__(self):
        if self.max_expansions <= 0:
            raise ValueError("max_expansions must be positive")
        if not self.heuristic_text:
            from .heuristic import render_heuristic

            object.__setattr__(self, "heuristic_text", render_heuristic(self.heuristic))
        elif parse_heuristic(self.heuristic_text) != self.heuristic:
            raise ValueError("heuristic_text does not parse to the given heuristic")

    @classmethod
    def from_text(
        cls, heuristic_text: str, primitive_id: str, max_expansions: int = DEFAULT_MAX_EXPANSIONS
    ) -> "PlannerConfig":
        return cls(
            parse_heuristic(heuristic_text),
            parse_primitive_id(primitive_id),
            max_expansions,
            heuristic_text.strip(),
        )

    @property
    def primitive_id_text(self) -> str:
        return format_primitive_id(self.primitive_set_id)

    def to_dict(self) -> dict:
        return {
            "heuristic": self.heuristic_text,
            "motion_primitives_id": self.primitive_id_text,
            "max_expansions": self.max_expansions,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PlannerConfig":
        return cls.from_text(
            data["heuristic"],
            data["motion_primitives_id"],
            data.get("max_expansions", DEFAULT_MAX_EXPANSIONS),
        )


@dataclass
class PlanResult:
    trajectory: Trajectory
    g_cost: float
    expansions: int


@dataclass(order=True)
class _QueueEntry:
    priority: float
    g_cost: float
    order: int
    node: "_Node" = field(compare=False)


@dataclass
class _Node:
    state: VehicleState
    segment: tuple[VehicleState, ...]  # includes the anchor state
    parent: Optional["_Node"]
    g_cost: float
    key: tuple
    is_goal: bool = False

    def path(self) -> list[VehicleState]:
        chunks = []
        node = self
        while node.parent is not None:
            chunks.append(node.segment[1:])
            node = node.parent
        states = [node.state]
        for chunk in reversed(chunks):
            states.extend(chunk)
        return states


def step_cost(segment: Sequence[VehicleState] | Trajectory, dt: Optional[float] = None) -> float:
    """Search cost of a path segment: its duration in seconds."""
    if isinstance(segment, Trajectory):
        dt = segment.dt if dt is None else dt
        segment = segment.states
    if dt is None:
        raise ValueError("dt is required for a bare state sequence")
    if not segment:
        raise ValueError("segment must not be empty")
    return (segment[-1].time_step - segment[0].time_step) * dt


def collision_free(
    states: Sequence[VehicleState], scenario: Scenario, vehicle: VehicleModelParams
) -> bool:
    radius_ego = 0.5 * math.hypot(vehicle.length, vehicle.width)
    for s in states:
        if s.time_step > scenario.horizon:
            raise HorizonExceeded(f"time step {s.time_step} beyond horizon {scenario.horizon}")
        ego = (s.x, s.y, s.orientation, vehicle.length, vehicle.width)
        for obs in scenario.obstacles:
            ox, oy, oth = obs.poses[s.time_step]
            reach = radius_ego + 0.5 * math.hypot(obs.length, obs.width)
            if (s.x - ox) ** 2 + (s.y - oy) ** 2 > reach * reach:
                continue
            if rectangles_intersect(ego, (ox, oy, oth, obs.length, obs.width)):
                return False
    return True


def _snap(value: float, samples: Sequence[float], step: float, what: str) -> float:
    nearest = min(samples, key=lambda s: abs(s - value))
    if abs(nearest - value) > 0.5 * step + 1e-9:
        raise InfeasibleStart(
            f"initial {what} {value} is more than half a step from the nearest sample {nearest}"
        )
    return nearest


def _key(state: VehicleState) -> tuple:
    return (
        round(state.x / POSITION_RESOLUTION),
        round(state.y / POSITION_RESOLUTION),
        round(state.orientation / ORIENTATION_RESOLUTION),
        round(state.velocity, 9),
        round(state.steering_angle, 9),
        state.time_step,
    )


def snap_initial_state(problem: PlanningProblem, primitive_set: PrimitiveSet) -> VehicleState:
    pid = primitive_set.id
    init = problem.initial_state
    v = _snap(init.velocity, primitive_set.velocity_samples, pid.v_step, "velocity")
    sa = _snap(init.steering_angle, primitive_set.steering_samples, pid.sa_step, "steering angle")
    return VehicleState(init.x, init.y, init.orientation, v, sa, 0)


def plan(
    scenario: Scenario,
    problem: PlanningProblem,
    config: PlannerConfig,
    primitive_set: Optional[PrimitiveSet] = None,
    vehicle: Optional[VehicleModelParams] = None,
) -> PlanResult:
    """Search for the first goal-reaching node in priority order.

    Raises :class:`NoSolution` when the open set empties or the expansion
    budget runs out, and :class:`InfeasibleStart` when the initial state is
    not within half a grid step of the primitive samples.
    """
    if vehicle is None:
        vehicle = vehicle_model(config.primitive_set_id.model)
    if primitive_set is None:
        primitive_set = cached_primitive_set(config.primitive_set_id, None, scenario.dt)
    goal = problem.goal
    dt = scenario.dt

    start = snap_initial_state(problem, primitive_set)
    if not collision_free([start], scenario, vehicle):
        raise NoSolution("initial state is in collision")
    if goal.contains(start):
        return PlanResult(Trajectory((start,), dt), 0.0, 0)

    counter = itertools.count()
    root = _Node(start, (start,), None, 0.0, _key(start))
    best_g = {root.key: 0.0}
    open_heap = [_QueueEntry(0.0, 0.0, next(counter), root)]
    expansions = 0

    while open_heap:
        entry = heapq.heappop(open_heap)
        node = entry.node
        if node.is_goal:
            traj = Trajectory(tuple(node.path()), dt)
            logger.debug("goal reached after %d expansions, g=%.3f", expansions, node.g_cost)
            return PlanResult(traj, node.g_cost, expansions)
        if node.g_cost > best_g.get(node.key, math.inf):
            continue  # stale entry superseded by a cheaper path
        if expansions >= config.max_expansions:
            raise NoSolution(f"expansion limit {config.max_expansions} reached")
        expansions += 1

        anchor = node.state
        for prim in primitive_set.starting_at(anchor.velocity, anchor.steering_angle):
            seg = transform_primitive(prim, anchor)
            if seg[-1].time_step > scenario.horizon:
                seg = [s for s in seg if s.time_step <= scenario.horizon]
                if len(seg) < 2:
                    continue
            is_goal = False
            for i in range(1, len(seg)):
                if goal.contains(seg[i]):
                    seg = seg[: i + 1]
                    is_goal = True
                    break
            if not collision_free(seg[1:], scenario, vehicle):
                continue
            g = node.g_cost + step_cost(seg, dt)
            end = seg[-1]
            key = _key(end)
            if g >= best_g.get(key, math.inf):
                continue
            best_g[key] = g
            child = _Node(end, tuple(seg), node, g, key, is_goal)
            ctx = NodeContext(tuple(seg), tuple(child.path()), problem, scenario, dt)
            h = evaluate_heuristic(config.heuristic, ctx)
            heapq.heappush(open_heap, _QueueEntry(g + h, g, next(counter), child))

    raise NoSolution("open set exhausted without reaching the goal")
