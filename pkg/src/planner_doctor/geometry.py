"""Small planar geometry helpers shared by the scenario model and the planner."""

from __future__ import annotations

import math

TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, TWO_PI)
    if wrapped <= 0.0:
        wrapped += TWO_PI
    return wrapped - math.pi


def angle_diff(a: float, b: float) -> float:
    """Absolute angular difference in [0, pi]."""
    return abs(wrap_angle(a - b))


def point_segment_distance(px, py, ax, ay, bx, by) -> float:
    dx, dy = bx - ax, by - ay
    seg_len2 = dx * dx + dy * dy
    if seg_len2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / seg_len2
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def rectangle_corners(cx: float, cy: float, theta: float, length: float, width: float):
    """Corners of an oriented rectangle centred at (cx, cy), counter-clockwise."""
    c, s = math.cos(theta), math.sin(theta)
    hl, hw = 0.5 * length, 0.5 * width
    corners = []
    for lx, ly in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
        corners.append((cx + lx * c - ly * s, cy + lx * s + ly * c))
    return corners


def _project(corners, ax, ay):
    values = [x * ax + y * ay for x, y in corners]
    return min(values), max(values)


def rectangles_intersect(a, b) -> bool:
    """Separating-axis test for two oriented rectangles.

    ``a`` and ``b`` are ``(cx, cy, theta, length, width)`` tuples. Touching
    rectangles count as intersecting.
    """
    ca = rectangle_corners(*a)
    cb = rectangle_corners(*b)
    for theta in (a[2], b[2]):
        for ax, ay in ((math.cos(theta), math.sin(theta)), (-math.sin(theta), math.cos(theta))):
            amin, amax = _project(ca, ax, ay)
            bmin, bmax = _project(cb, ax, ay)
            if amax < bmin or bmax < amin:
                return False
    return True
