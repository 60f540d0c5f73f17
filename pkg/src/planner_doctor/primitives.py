"""Motion-primitive sets: ID grammar, offline generation and lattice connectivity.

A primitive-set ID encodes the sampling grid used to build the set, e.g.::

    V_0.0_20.0_Vstep_4.0_SA_-1.066_1.066_SAstep_0.18_T_0.5_Model_BMW_320i

Velocities (V) and steering angles (SA) are sampled from ``min`` upwards in
increments of the step, ``T`` is the duration of every primitive and ``Model``
names the vehicle parameters used for forward simulation.
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .scenario import VehicleState

CONNECT_TOL = 1e-9
_NUMBER = re.compile(r"^-?\d+(\.\d+)?([eE][-+]?\d+)?$")
_NUMERIC_FIELDS = ("v_min", "v_max", "v_step", "sa_min", "sa_max", "sa_step", "duration")


class MalformedId(ValueError):
    def __init__(self, message: str, token: str = ""):
        super().__init__(message)
        self.token = token


class EmptyPrimitiveSet(ValueError):
    pass


class ConnectivityError(ValueError):
    pass


@dataclass(frozen=True)
class PrimitiveSetId:
    v_min: float
    v_max: float
    v_step: float
    sa_min: float
    sa_max: float
    sa_step: float
    duration: float
    model: str
    # textual form of each numeric field as parsed, so formatting round-trips
    text: Optional[tuple[str, ...]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for name in _NUMERIC_FIELDS:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise MalformedId(f"{name} must be finite", str(value))
        if self.v_min > self.v_max:
            raise MalformedId(f"v_min {self.v_min} exceeds v_max {self.v_max}", str(self.v_min))
        if self.sa_min > self.sa_max:
            raise MalformedId(f"sa_min {self.sa_min} exceeds sa_max {self.sa_max}", str(self.sa_min))
        for name in ("v_step", "sa_step", "duration"):
            if getattr(self, name) <= 0:
                raise MalformedId(f"{name} must be positive", str(getattr(self, name)))
        if not self.model:
            raise MalformedId("model identifier is empty")

    def __str__(self) -> str:
        return format_primitive_id(self)


def parse_primitive_id(text: str) -> PrimitiveSetId:
    tokens = text.strip().split("_")
    expected = {0: "V", 3: "Vstep", 5: "SA", 8: "SAstep", 10: "T", 12: "Model"}
    if len(tokens) < 14:
        raise MalformedId(f"primitive ID '{text}' is incomplete", text)
    for pos, keyword in expected.items():
        if tokens[pos] != keyword:
            raise MalformedId(
                f"expected keyword '{keyword}' at position {pos} of '{text}', got '{tokens[pos]}'",
                tokens[pos],
            )
    numeric_tokens = [tokens[i] for i in (1, 2, 4, 6, 7, 9, 11)]
    for tok in numeric_tokens:
        if not _NUMBER.match(tok):
            raise MalformedId(f"non-numeric field '{tok}' in primitive ID '{text}'", tok)
    model = "_".join(tokens[13:])
    values = [float(t) for t in numeric_tokens]
    return PrimitiveSetId(*values, model=model, text=tuple(numeric_tokens))


def _render_number(value: float) -> str:
    return repr(float(value))


def format_primitive_id(pid: PrimitiveSetId) -> str:
    parts = []
    for i, name in enumerate(_NUMERIC_FIELDS):
        value = getattr(pid, name)
        if pid.text is not None and float(pid.text[i]) == value:
            parts.append(pid.text[i])
        else:
            parts.append(_render_number(value))
    vmin, vmax, dv, samin, samax, dsa, tau = parts
    return f"V_{vmin}_{vmax}_Vstep_{dv}_SA_{samin}_{samax}_SAstep_{dsa}_T_{tau}_Model_{pid.model}"


# --- vehicle models -----------------------------------------------------------


@dataclass(frozen=True)
class VehicleModelParams:
    wheelbase: float
    length: float
    width: float
    a_max: float
    steer_rate_max: float
    v_switch: Optional[float] = None

    def __post_init__(self):
        for name in ("wheelbase", "length", "width", "a_max", "steer_rate_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"vehicle parameter {name} must be positive")
        if self.v_switch is not None and self.v_switch <= 0:
            raise ValueError("vehicle parameter v_switch must be positive")

    def accel_limit(self, speed: float) -> float:
        if self.v_switch is None or speed <= self.v_switch:
            return self.a_max
        return self.a_max * self.v_switch / speed


VEHICLE_MODELS = {
    "BMW_320i": VehicleModelParams(
        wheelbase=2.578, length=4.508, width=1.610, a_max=11.5, steer_rate_max=0.4
    ),
}


def vehicle_model(name: str) -> VehicleModelParams:
    try:
        return VEHICLE_MODELS[name]
    except KeyError:
        raise ValueError(
            f"unknown vehicle model '{name}'; known models: {', '.join(sorted(VEHICLE_MODELS))}"
        ) from None


# --- generation ---------------------------------------------------------------


def sample_grid(lo: float, hi: float, step: float) -> tuple[float, ...]:
    """Samples ``lo, lo+step, ...`` not exceeding ``hi``; at least one sample."""
    count = max(1, math.floor((hi - lo) / step + 1e-9) + 1)
    return tuple(round(lo + i * step, 12) for i in range(count))


@dataclass(frozen=True)
class MotionPrimitive:
    states: tuple[VehicleState, ...]
    v_start: float
    v_end: float
    sa_start: float
    sa_end: float
    accel: float
    steer_rate: float
    index: int = 0

    @property
    def start_key(self) -> tuple[float, float]:
        return (self.v_start, self.sa_start)


@dataclass(frozen=True)
class PrimitiveSet:
    id: PrimitiveSetId
    primitives: tuple[MotionPrimitive, ...]
    successor_index: dict
    dt: float
    velocity_samples: tuple[float, ...]
    steering_samples: tuple[float, ...]
    by_start: dict = field(repr=False)

    def successors(self, primitive: MotionPrimitive) -> tuple[MotionPrimitive, ...]:
        return tuple(self.primitives[i] for i in self.successor_index[primitive.index])

    def starting_at(self, velocity: float, steering_angle: float) -> tuple[MotionPrimitive, ...]:
        return self.by_start.get((velocity, steering_angle), ())

    def __len__(self) -> int:
        return len(self.primitives)


def _integrate(v0, sa0, acc, sr, wheelbase, dt, n_steps, substeps=20):
    """RK4 integration of the kinematic single-track model, vectorised over primitives.

    Velocity and steering angle follow their exact linear profiles; only the
    pose (x, y, heading) is integrated. Returns arrays of shape (P, n_steps+1).
    """
    p = v0.shape[0]
    xs = np.zeros((p, n_steps + 1))
    ys = np.zeros((p, n_steps + 1))
    ths = np.zeros((p, n_steps + 1))
    x = np.zeros(p)
    y = np.zeros(p)
    th = np.zeros(p)
    h = dt / substeps

    def rates(t, th_):
        v = v0 + acc * t
        d = sa0 + sr * t
        return v * np.cos(th_), v * np.sin(th_), v * np.tan(d) / wheelbase

    t = 0.0
    for k in range(n_steps):
        for _ in range(substeps):
            k1 = rates(t, th)
            k2 = rates(t + h / 2, th + h / 2 * k1[2])
            k3 = rates(t + h / 2, th + h / 2 * k2[2])
            k4 = rates(t + h, th + h * k3[2])
            x = x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            y = y + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            th = th + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            t += h
        xs[:, k + 1] = x
        ys[:, k + 1] = y
        ths[:, k + 1] = th
    return xs, ys, ths


def generate_primitive_set(
    pid: PrimitiveSetId, model: Optional[VehicleModelParams] = None, dt: float = 0.1
) -> PrimitiveSet:
    if model is None:
        model = vehicle_model(pid.model)
    n_steps = round(pid.duration / dt)
    if n_steps < 1 or abs(n_steps * dt - pid.duration) > 1e-9:
        raise ValueError(f"primitive duration {pid.duration} is not a multiple of dt {dt}")
    if pid.v_min < 0:
        raise ValueError("velocity samples must be non-negative")

    v_grid = sample_grid(pid.v_min, pid.v_max, pid.v_step)
    sa_grid = sample_grid(pid.sa_min, pid.sa_max, pid.sa_step)
    tau = pid.duration

    tuples = []
    for vs in v_grid:
        for ve in v_grid:
            if abs(ve - vs) > pid.v_step + 1e-9:
                continue
            acc = (ve - vs) / tau
            if abs(acc) > model.accel_limit(max(vs, ve)) + 1e-12:
                continue
            for ss in sa_grid:
                for se in sa_grid:
                    if abs(se - ss) > pid.sa_step + 1e-9:
                        continue
                    sr = (se - ss) / tau
                    if abs(sr) > model.steer_rate_max + 1e-12:
                        continue
                    tuples.append((vs, ve, ss, se, acc, sr))
    if not tuples:
        raise EmptyPrimitiveSet(f"no feasible primitives for {format_primitive_id(pid)}")

    arr = np.array(tuples)
    xs, ys, ths = _integrate(arr[:, 0], arr[:, 2], arr[:, 4], arr[:, 5], model.wheelbase, dt, n_steps)

    primitives = []
    for i, (vs, ve, ss, se, acc, sr) in enumerate(tuples):
        states = []
        for k in range(n_steps + 1):
            frac = k / n_steps
            v = ve if k == n_steps else max(0.0, vs + (ve - vs) * frac)
            sa = se if k == n_steps else ss + (se - ss) * frac
            states.append(VehicleState(xs[i, k], ys[i, k], ths[i, k], v, sa, k))
        primitives.append(MotionPrimitive(tuple(states), vs, ve, ss, se, acc, sr, index=i))

    by_start: dict = {}
    for prim in primitives:
        by_start.setdefault(prim.start_key, []).append(prim)
    by_start = {k: tuple(v) for k, v in by_start.items()}
    successor_index = {
        prim.index: tuple(q.index for q in by_start.get((prim.v_end, prim.sa_end), ()))
        for prim in primitives
    }
    return PrimitiveSet(pid, tuple(primitives), successor_index, dt, v_grid, sa_grid, by_start)


@functools.lru_cache(maxsize=32)
def cached_primitive_set(pid: PrimitiveSetId, model: Optional[VehicleModelParams], dt: float) -> PrimitiveSet:
    return generate_primitive_set(pid, model, dt)


def connectable(a: MotionPrimitive, b: MotionPrimitive) -> bool:
    return abs(a.v_end - b.v_start) <= CONNECT_TOL and abs(a.sa_end - b.sa_start) <= CONNECT_TOL


def transform_primitive(p: MotionPrimitive, anchor: VehicleState) -> list[VehicleState]:
    """Place a canonical primitive at ``anchor``; the first returned state coincides with it."""
    if (
        abs(anchor.velocity - p.v_start) > CONNECT_TOL
        or abs(anchor.steering_angle - p.sa_start) > CONNECT_TOL
    ):
        raise ConnectivityError(
            f"primitive starts at v={p.v_start}, sa={p.sa_start} but anchor has "
            f"v={anchor.velocity}, sa={anchor.steering_angle}"
        )
    c, s = math.cos(anchor.orientation), math.sin(anchor.orientation)
    out = []
    for st in p.states:
        out.append(
            VehicleState(
                anchor.x + c * st.x - s * st.y,
                anchor.y + s * st.x + c * st.y,
                anchor.orientation + st.orientation,
                st.velocity,
                st.steering_angle,
                anchor.time_step + st.time_step,
            )
        )
    return out
