"""The heuristic expression language.

Heuristics are arithmetic expressions over a fixed catalog of cost features::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := NUMBER | IDENT | "(" expr ")" | FUNC "(" expr "," expr ")"

``FUNC`` is one of ``min``, ``max``, ``if_reached_goal`` and
``if_zero_velocity``. Evaluation is total: near-zero denominators yield
:data:`DIVISION_GUARD`, intermediate values are kept finite and the final
value is clamped at zero.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

from .geometry import angle_diff
from .scenario import PlanningProblem, Scenario, VehicleState, distance_to_goal, goal_reached

DIVISION_GUARD = 1e6
DIVISION_EPS = 1e-12
ZERO_VELOCITY_TOL = 1e-8
MAX_DEPTH = 64
_FINITE_MAX = sys.float_info.max

BINARY_OPS = ("+", "-", "*", "/")
FUNCTIONS = ("min", "max", "if_reached_goal", "if_zero_velocity")


class HeuristicError(ValueError):
    pass


class HeuristicSyntaxError(HeuristicError):
    def __init__(self, message: str, position: int, token: str):
        super().__init__(f"{message} at position {position} (token {token!r})")
        self.position = position
        self.token = token


class UnknownFeatureError(HeuristicError):
    def __init__(self, name: str):
        valid = ", ".join(f.name for f in FEATURES)
        super().__init__(f"unknown feature '{name}'; valid features are: {valid}")
        self.name = name


# --- AST ----------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Feature:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    first: "Node"
    second: "Node"


Node = Union[Constant, Feature, BinOp, Call]


def _children(node: Node) -> tuple:
    if isinstance(node, BinOp):
        return (node.left, node.right)
    if isinstance(node, Call):
        return (node.first, node.second)
    return ()


def _depth(node: Node) -> int:
    # iterative so that pathological inputs cannot hit the recursion limit
    deepest = 0
    stack = [(node, 1)]
    while stack:
        cur, d = stack.pop()
        deepest = max(deepest, d)
        stack.extend((child, d + 1) for child in _children(cur))
    return deepest


def _check(node: Node) -> None:
    if isinstance(node, Constant):
        if not math.isfinite(node.value) or node.value < 0:
            raise HeuristicError(f"constants must be finite and non-negative, got {node.value}")
    elif isinstance(node, Feature):
        if node.name not in FEATURE_INDEX:
            raise UnknownFeatureError(node.name)
    elif isinstance(node, BinOp):
        if node.op not in BINARY_OPS:
            raise HeuristicError(f"unknown operator {node.op!r}")
        _check(node.left)
        _check(node.right)
    elif isinstance(node, Call):
        if node.func not in FUNCTIONS:
            raise HeuristicError(f"unknown function {node.func!r}")
        _check(node.first)
        _check(node.second)
    else:
        raise HeuristicError(f"not a heuristic node: {node!r}")


@dataclass(frozen=True)
class HeuristicSpec:
    root: Node

    def __post_init__(self):
        if _depth(self.root) > MAX_DEPTH:
            raise HeuristicError(f"expression deeper than {MAX_DEPTH} levels")
        _check(self.root)

    def features(self) -> set[str]:
        found = set()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Feature):
                found.add(node.name)
            elif isinstance(node, BinOp):
                stack += [node.left, node.right]
            elif isinstance(node, Call):
                stack += [node.first, node.second]
        return found

    def __str__(self) -> str:
        return render_heuristic(self)


# --- parsing ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise HeuristicSyntaxError("unexpected character", pos, text[pos])
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.depth = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            raise HeuristicSyntaxError(f"expected {value!r}", pos, text or "<end>")

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            _, text, pos = self.peek()
            raise HeuristicSyntaxError(f"expression nests deeper than {MAX_DEPTH} levels", pos, text)

    def expr(self) -> Node:
        self.enter()
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        self.depth -= 1
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            value = float(text)
            if not math.isfinite(value):
                raise HeuristicSyntaxError("number out of range", pos, text)
            return Constant(value)
        if kind == "ident":
            if text in FUNCTIONS:
                self.expect("(")
                first = self.expr()
                self.expect(",")
                second = self.expr()
                self.expect(")")
                return Call(text, first, second)
            if text not in FEATURE_INDEX:
                raise UnknownFeatureError(text)
            return Feature(text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise HeuristicSyntaxError("expected a number, feature, function or '('", pos, text or "<end>")


def parse_heuristic(text: str) -> HeuristicSpec:
    parser = _Parser(text)
    root = parser.expr()
    kind, tok, pos = parser.peek()
    if kind != "end":
        raise HeuristicSyntaxError("unexpected trailing input", pos, tok)
    return HeuristicSpec(root)


# --- rendering ----------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def _render_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _render(node: Node) -> str:
    if isinstance(node, Constant):
        return _render_number(node.value)
    if isinstance(node, Feature):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({_render(node.first)}, {_render(node.second)})"
    prec = _PRECEDENCE[node.op]
    left = _render(node.left)
    if isinstance(node.left, BinOp) and _PRECEDENCE[node.left.op] < prec:
        left = f"({left})"
    right = _render(node.right)
    # operators are left-associative, so an equal-precedence right child needs parens
    if isinstance(node.right, BinOp) and _PRECEDENCE[node.right.op] <= prec:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def render_heuristic(spec: HeuristicSpec) -> str:
    return _render(spec.root)


# --- features -----------------------------------------------------------------


@dataclass(frozen=True)
class NodeContext:
    """What a heuristic can observe about a search node."""

    last_segment: Sequence[VehicleState]
    full_path: Sequence[VehicleState]
    problem: PlanningProblem
    scenario: Optional[Scenario] = None
    dt: float = 0.1

    def __post_init__(self):
        if not self.last_segment:
            raise ValueError("last_segment must not be empty")
        n = len(self.last_segment)
        if len(self.full_path) < n or tuple(self.full_path[-n:]) != tuple(self.last_segment):
            raise ValueError("last_segment must be a suffix of full_path")

    @property
    def current(self) -> VehicleState:
        return self.last_segment[-1]


@dataclass(frozen=True)
class FeatureInfo:
    name: str
    docstring: str
    unit: str
    compute: Callable[[NodeContext], float]


def _orientation_to_goal_diff(ctx: NodeContext) -> float:
    s = ctx.current
    gx, gy = ctx.problem.goal.center
    if math.hypot(gx - s.x, gy - s.y) < 1e-9:
        return 0.0
    return angle_diff(math.atan2(gy - s.y, gx - s.x), s.orientation)


def _time_cost(ctx: NodeContext) -> float:
    return (len(ctx.last_segment) - 1) * ctx.dt


def _distance_to_goal(ctx: NodeContext) -> float:
    return distance_to_goal(ctx.current, ctx.problem.goal)


def _velocity(ctx: NodeContext) -> float:
    return ctx.current.velocity


def _remaining_desired_time(ctx: NodeContext) -> float:
    return (ctx.problem.goal.time_interval[0] - ctx.current.time_step) * ctx.dt


def _acceleration_cost(ctx: NodeContext) -> float:
    seg, dt = ctx.last_segment, ctx.dt
    return sum(((b.velocity - a.velocity) / dt) ** 2 * dt for a, b in zip(seg, seg[1:]))


def _path_efficiency(ctx: NodeContext) -> float:
    seg = ctx.last_segment
    arc = sum(math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(seg, seg[1:]))
    chord = math.hypot(seg[-1].x - seg[0].x, seg[-1].y - seg[0].y)
    if chord < 1e-9:
        return 1.0
    return min(arc / chord, DIVISION_GUARD)


def _steering_angle_cost(ctx: NodeContext) -> float:
    return sum(s.steering_angle**2 * ctx.dt for s in ctx.last_segment)


def _steering_velocity_cost(ctx: NodeContext) -> float:
    seg, dt = ctx.last_segment, ctx.dt
    return sum(((b.steering_angle - a.steering_angle) / dt) ** 2 * dt for a, b in zip(seg, seg[1:]))


FEATURES: tuple[FeatureInfo, ...] = (
    FeatureInfo(
        "orientation_to_goal_diff",
        "absolute difference between heading-to-goal and current orientation",
        "rad",
        _orientation_to_goal_diff,
    ),
    FeatureInfo("time_cost", "duration of the last path segment", "s", _time_cost),
    FeatureInfo("distance_to_goal", "Euclidean distance to goal center", "m", _distance_to_goal),
    FeatureInfo("velocity", "current velocity", "m/s", _velocity),
    FeatureInfo(
        "remaining_desired_time",
        "goal start time minus current time",
        "s",
        _remaining_desired_time,
    ),
    FeatureInfo(
        "acceleration_cost", "Returns the acceleration costs.", "m^2/s^3", _acceleration_cost
    ),
    FeatureInfo(
        "path_efficiency",
        "Returns the ratio of travelled arc length to straight-line displacement over the "
        "last path segment (1 for a straight segment).",
        "-",
        _path_efficiency,
    ),
    FeatureInfo(
        "steering_angle_cost",
        "Returns the steering angle costs (integrated squared steering angle over the last "
        "path segment).",
        "rad^2*s",
        _steering_angle_cost,
    ),
    FeatureInfo(
        "steering_velocity_cost",
        "Returns the steering velocity costs (integrated squared steering rate over the last "
        "path segment).",
        "rad^2/s",
        _steering_velocity_cost,
    ),
)
FEATURE_INDEX = {f.name: f for f in FEATURES}


def list_features() -> tuple[FeatureInfo, ...]:
    return FEATURES


# --- evaluation ---------------------------------------------------------------


def _finite(value: float) -> float:
    if value != value:  # NaN cannot arise from finite operands, but stay total
        return 0.0
    return min(max(value, -_FINITE_MAX), _FINITE_MAX)


def _eval(node: Node, ctx: NodeContext, cache: dict) -> float:
    if isinstance(node, Constant):
        return node.value
    if isinstance(node, Feature):
        if node.name not in cache:
            cache[node.name] = _finite(FEATURE_INDEX[node.name].compute(ctx))
        return cache[node.name]
    if isinstance(node, Call):
        if node.func == "if_reached_goal":
            branch = node.first if goal_reached(ctx.last_segment, ctx.problem.goal) else node.second
            return _eval(branch, ctx, cache)
        if node.func == "if_zero_velocity":
            branch = node.first if abs(ctx.current.velocity) <= ZERO_VELOCITY_TOL else node.second
            return _eval(branch, ctx, cache)
        a = _eval(node.first, ctx, cache)
        b = _eval(node.second, ctx, cache)
        return min(a, b) if node.func == "min" else max(a, b)
    a = _eval(node.left, ctx, cache)
    b = _eval(node.right, ctx, cache)
    if node.op == "+":
        return _finite(a + b)
    if node.op == "-":
        return _finite(a - b)
    if node.op == "*":
        return _finite(a * b)
    if abs(b) < DIVISION_EPS:
        return DIVISION_GUARD
    return _finite(a / b)


def evaluate_heuristic(spec: HeuristicSpec, ctx: NodeContext) -> float:
    return max(_eval(spec.root, ctx, {}), 0.0)


def evaluate_unclamped(spec: HeuristicSpec, ctx: NodeContext) -> float:
    return _eval(spec.root, ctx, {})


ZERO_HEURISTIC = HeuristicSpec(Constant(0.0))
