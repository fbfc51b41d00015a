"""Stateless scripted controllers used to produce demonstration actions.

Both controllers output an absolute gripper target plus grip command; the
simulator caps the per-step displacement, so far-away targets simply mean
"head that way at full speed".
"""

from __future__ import annotations

import math

from ..core import GRIP_CLOSED, GRIP_OPEN, ActionVector
from .world import TaskSpec, WorldConfig, WorldState

# pushing geometry, all relative to the cube center
_HOLD_DIST = 0.55
_SLOW_RADIUS = 2.0  # cube-goal distance below which the push decelerates
_BITE_MIN = 0.3  # terminal creep per step; keeps the pursuit point strictly unreachable
_STANDOFF = 3.3  # approach point: outside contact range
_ALIGN_ANGLE = math.radians(30.0)  # cone half-angle to enter the pocket from the standoff
_WIDE_ANGLE = math.radians(62.0)  # cone half-angle that keeps pursuit once close in
_WIDE_DIST = 2.6  # within this range the wide cone applies (entered it by pursuing)
_ALIGN_DIST = 3.9
_CLEAR = 3.1  # straight paths must keep this clearance from the cube center
_ORBIT_RADIUS = 3.6
_MIN_HOP = math.radians(15.0)

# picking
_ABOVE_OFFSET = 3.2
_DESCEND_X_TOL = 0.3
_GRASP_DIST = 0.45
_LIFT_TARGET = 1.5


def _norm(x: float, y: float) -> float:
    return math.hypot(x, y)


def _unit(x: float, y: float) -> tuple[float, float]:
    n = math.hypot(x, y)
    if n == 0.0:
        return 1.0, 0.0
    return x / n, y / n


def _segment_distance(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> float:
    """Distance from point p to segment a-b."""
    abx, aby = bx - ax, by - ay
    denom = abx * abx + aby * aby
    if denom == 0.0:
        return _norm(px - ax, py - ay)
    t = ((px - ax) * abx + (py - ay) * aby) / denom
    t = min(1.0, max(0.0, t))
    return _norm(px - (ax + t * abx), py - (ay + t * aby))


def _pocket_angle(g, cube, away: tuple[float, float]) -> float:
    """Signed angle of the gripper around the cube, measured from `away`."""
    vx, vy = _unit(g.x - cube.x, g.y - cube.y)
    ax, ay = away
    return math.atan2(ax * vy - ay * vx, ax * vx + ay * vy)


def _contact_distance(ax: float, ay: float, config: WorldConfig) -> float:
    """Gripper-center distance from the cube center at first finger contact.

    (ax, ay) is the unit direction from the cube toward the gripper; the grip
    is closed. Mirrors the simulator's overlap test: each finger rect dilated
    by the cube half-size, fingers offset horizontally from the gripper
    center. The answer varies with direction (side contact reaches farther
    than top contact), which is why the pursuit depth below can't use a
    single constant.
    """
    reach_x = config.finger_width / 2.0 + config.cube_half
    reach_y = config.finger_height / 2.0 + config.cube_half
    off = config.finger_gap_closed / 2.0 + config.finger_width / 2.0
    best = 0.0
    for o in (-off, off):
        if ax > 0.0:
            sx = (reach_x - o) / ax
        elif ax < 0.0:
            sx = (-reach_x - o) / ax
        else:
            sx = math.inf if abs(o) < reach_x else 0.0
        sy = reach_y / abs(ay) if ay != 0.0 else math.inf
        best = max(best, min(sx, sy))
    return best


def _push_action(state: WorldState, config: WorldConfig) -> ActionVector:
    """Push the cube straight down the cube→goal line.

    The contact side is always the point opposite the goal, so the commanded
    waypoint varies smoothly with cube and goal positions. In the pocket the
    controller pursues a point just inside contact range, which tracks the
    cube and self-corrects drift; contact resolution shoves the cube along
    one axis per step, so diagonal progress is a fine zigzag around the line.
    How far inside sets the push speed: the pursuit point sits one bite
    deeper than the direction's contact stop, and the bite shrinks with the
    cube's remaining distance — a full-speed shove from afar decays to a
    creep at the goal, so neither the expert nor a clone that replans only
    every few steps can plough the cube through the target ring. The pocket
    cone is narrow on entry but wide once the gripper is close in — a gripper
    that arrived by pursuing stays in pursuit even when a contact kick swings
    the line — which kills pursue/retreat flapping without any controller
    memory. Off-pocket it walks around a clearance circle.
    """
    g = state.gripper
    cube = state.entity(state.target_id)
    goal = state.entity(state.goal_id)

    ex, ey = goal.x - cube.x, goal.y - cube.y
    dist_cg = _norm(ex, ey)
    if dist_cg <= _HOLD_DIST:
        return ActionVector(g.x, g.y, GRIP_CLOSED)

    ax, ay = _unit(-ex, -ey)  # from the cube toward its standoff side
    dist_gc = _norm(g.x - cube.x, g.y - cube.y)
    theta = _pocket_angle(g, cube, (ax, ay))
    cone = _WIDE_ANGLE if dist_gc <= _WIDE_DIST else _ALIGN_ANGLE
    if abs(theta) <= cone and dist_gc <= _ALIGN_DIST:
        bite = min(config.v_max, max(_BITE_MIN, config.v_max * dist_cg / _SLOW_RADIUS))
        depth = _contact_distance(ax, ay, config) - bite
        return ActionVector(cube.x + ax * depth, cube.y + ay * depth, GRIP_CLOSED)

    bx, by = cube.x + ax * _STANDOFF, cube.y + ay * _STANDOFF
    if _segment_distance(cube.x, cube.y, g.x, g.y, bx, by) >= _CLEAR:
        return ActionVector(bx, by, GRIP_CLOSED)
    # blocked: hop around the clearance circle toward the standoff point; from
    # far out the tangent angle allows big hops, near the circle ~30 degrees
    beta = math.acos(min(1.0, _CLEAR / max(dist_gc, _CLEAR)))
    beta = max(beta, _MIN_HOP)
    phi = math.copysign(max(abs(theta) - beta, 0.0), theta)
    wx = ax * math.cos(phi) - ay * math.sin(phi)
    wy = ax * math.sin(phi) + ay * math.cos(phi)
    return ActionVector(cube.x + wx * _ORBIT_RADIUS, cube.y + wy * _ORBIT_RADIUS, GRIP_CLOSED)


def _pick_action(state: WorldState, task: TaskSpec, config: WorldConfig) -> ActionVector:
    g = state.gripper
    cube = state.entity(state.target_id)

    if state.held == state.target_id:
        return ActionVector(g.x, task.lift_height + _LIFT_TARGET, GRIP_CLOSED)
    if _norm(cube.x - g.x, cube.y - g.y) <= _GRASP_DIST:
        return ActionVector(cube.x, cube.y, GRIP_CLOSED)

    above_y = cube.y + _ABOVE_OFFSET
    if abs(g.x - cube.x) <= _DESCEND_X_TOL and g.y <= above_y + 0.6:
        return ActionVector(cube.x, cube.y, GRIP_OPEN)
    return ActionVector(cube.x, above_y, GRIP_OPEN)


def scripted_expert(state: WorldState, task: TaskSpec, config: WorldConfig = WorldConfig()) -> ActionVector:
    """Next demonstration action for the given state. Stateless.

    Actions are absolute waypoint targets; the simulator caps per-step motion
    at v_max, so distant waypoints just mean "head that way at full speed".
    Recording the waypoint rather than the reachable point keeps the label a
    function of the scene (cube, goal) instead of the gripper's own position,
    which would otherwise dominate a regression fit.
    """
    if task.kind == "push":
        return _push_action(state, config)
    if task.kind == "pick":
        return _pick_action(state, task, config)
    raise ValueError(f"unknown task kind {task.kind!r}")
