"""2-D user kinematics relative to a BS at a fixed point with its array along +x."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

MIN_DISTANCE = 1.0


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0
    v_linear: float = 0.0
    v_angular: float = 0.0

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


def sample_velocity(rng: np.random.Generator) -> tuple[float, float]:
    """Linear speed ~ Exp(1) m/s, angular speed ~ N(0, 1) rad/s."""
    return float(rng.exponential(1.0)), float(rng.standard_normal())


def _reflect(value: float, upper: float) -> tuple[float, bool]:
    # fold into [0, upper]; also report whether the number of bounces is odd
    period = 2.0 * upper
    v = math.fmod(value, period)
    if v < 0:
        v += period
    if v > upper:
        v = period - v
    return v, math.floor(value / upper) % 2 == 1


def step_pose(pose: Pose, dt: float, bounds: tuple[float, float] = (100.0, 100.0),
              bs: tuple[float, float] = (0.0, 0.0)) -> Pose:
    """Advance one slot: rotate the heading, move along it, reflect off the walls.

    The heading is mirrored on each wall bounce. Users pushed inside
    ``MIN_DISTANCE`` of the BS are moved back out radially.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    heading = pose.heading + pose.v_angular * dt
    step = pose.v_linear * dt
    x = pose.x + step * math.cos(heading)
    y = pose.y + step * math.sin(heading)

    x, flip_x = _reflect(x, bounds[0])
    y, flip_y = _reflect(y, bounds[1])
    if flip_x:
        heading = math.pi - heading
    if flip_y:
        heading = -heading
    heading = math.fmod(heading, 2.0 * math.pi)

    x, y = push_out(x, y, bs, bounds)
    return replace(pose, x=x, y=y, heading=heading)


def push_out(x: float, y: float, bs=(0.0, 0.0), bounds=(100.0, 100.0)) -> tuple[float, float]:
    """Move a point radially away from the BS until it is ``MIN_DISTANCE`` away."""
    dx, dy = x - bs[0], y - bs[1]
    r = math.hypot(dx, dy)
    if r >= MIN_DISTANCE:
        return x, y
    if r == 0.0:
        # no radial direction: head for the scenario centre
        dx, dy = bounds[0] / 2 - bs[0], bounds[1] / 2 - bs[1]
        r = math.hypot(dx, dy) or 1.0
    x = min(max(bs[0] + dx * MIN_DISTANCE / r, 0.0), bounds[0])
    y = min(max(bs[1] + dy * MIN_DISTANCE / r, 0.0), bounds[1])
    return x, y


def geometry(position: tuple[float, float], bs: tuple[float, float] = (0.0, 0.0)) -> tuple[float, float]:
    """Distance and angle of departure (folded into [0, pi]) from the BS to ``position``."""
    dx = position[0] - bs[0]
    dy = position[1] - bs[1]
    if dx == 0.0 and dy == 0.0:
        raise ValueError("user position coincides with the BS")
    # a ULA cannot tell theta from -theta, so fold the lower half-plane up
    return math.hypot(dx, dy), abs(math.atan2(dy, dx))
