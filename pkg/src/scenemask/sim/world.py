"""World state, task definitions, scene sampling, and kinematic physics.

The world is a continuous 2D plane (x right, y up, world units) holding one
two-finger gripper and a few flat entities. Dynamics are kinematic: the
gripper teleports toward its commanded target with a per-step speed cap;
finger-entity overlap displaces the task cube along the contact normal;
closing the grip near the cube grasps it. Visual shifts (textures, gripper
recolor, distractors, tint) change pixels only, never geometry, so ground
truth masks are identical across shifts up to recolored gripper pixel values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..colors import COLOR_NAMES
from ..core import (
    GRIP_CLOSED,
    ActionVector,
    EntitySummary,
    HorizonConfig,
    PromptSet,
    ValidationError,
)
from ..prompt import parse_task_prompt, resolve

TEXTURES = ("plain", "stripes", "checker", "noise", "photo")

RELATION_PHRASES = (
    "on the left",
    "on the right",
    "that is closer to the yellow cube",
    "that is farther from the yellow cube",
)


@dataclass(frozen=True)
class WorldConfig:
    """Geometry and motion constants, in world units (10 px per unit)."""

    width: float = 32.0
    height: float = 18.0
    px_per_unit: int = 10
    v_max: float = 0.6
    grasp_radius: float = 1.0
    cube_half: float = 1.1
    cross_arm: float = 1.3
    cross_thick: float = 0.4
    blob_radius: float = 1.2
    finger_width: float = 1.6
    finger_height: float = 2.2
    finger_gap_open: float = 2.8
    finger_gap_closed: float = 0.5
    home: tuple[float, float] = (4.0, 14.0)
    table_color: tuple[int, int, int] = (205, 200, 190)

    @property
    def px_width(self) -> int:
        return int(round(self.width * self.px_per_unit))

    @property
    def px_height(self) -> int:
        return int(round(self.height * self.px_per_unit))


@dataclass(frozen=True)
class ShiftSpec:
    """A visual domain shift; the default instance is the unshifted condition."""

    background_texture: str = "plain"
    texture_seed: int = 0
    gripper_color: str = "green"
    distractor_count: int = 0
    distractor_palette: tuple[str, ...] = ("orange", "purple", "magenta")
    table_tint: tuple[int, int, int] | None = None

    def __post_init__(self) -> None:
        if self.background_texture not in TEXTURES:
            raise ValidationError(f"background_texture must be one of {TEXTURES}")
        if self.gripper_color not in COLOR_NAMES:
            raise ValidationError(f"gripper_color must be one of {COLOR_NAMES}")
        if self.distractor_count < 0:
            raise ValidationError("distractor_count must be >= 0")
        object.__setattr__(self, "distractor_palette", tuple(self.distractor_palette))
        for name in self.distractor_palette:
            if name not in COLOR_NAMES:
                raise ValidationError(f"distractor color {name!r} not in the palette")
        if self.table_tint is not None:
            tint = tuple(int(c) for c in self.table_tint)
            if len(tint) != 3 or any(not (0 <= c <= 255) for c in tint):
                raise ValidationError("table_tint must be an RGB triple")
            object.__setattr__(self, "table_tint", tint)

    def background_id(self) -> str:
        parts = [self.background_texture]
        if self.background_texture == "noise":
            parts.append(str(self.texture_seed))
        if self.table_tint is not None:
            parts.append("tint" + "".join(f"{c:02x}" for c in self.table_tint))
        return ":".join(parts)


@dataclass(frozen=True)
class TaskSpec:
    """One benchmark task: prompts, success predicate parameters, horizons."""

    name: str
    kind: str  # push | pick
    object_prompts: tuple[str, ...]
    task_prompt_template: str
    horizons: HorizonConfig
    success_eps: float = 0.8
    lift_height: float = 12.0
    max_expert_steps: int = 90

    def __post_init__(self) -> None:
        if self.kind not in ("push", "pick"):
            raise ValidationError("task kind must be push or pick")


TASKS: dict[str, TaskSpec] = {
    "push": TaskSpec(
        name="push",
        kind="push",
        object_prompts=("red cross",),
        task_prompt_template="gripper fingers and the blue cube",
        horizons=HorizonConfig(obs_horizon=2, action_horizon=6),
    ),
    "pick": TaskSpec(
        name="pick",
        kind="pick",
        object_prompts=(),
        task_prompt_template="gripper fingers and the blue cube",
        horizons=HorizonConfig(obs_horizon=2, action_horizon=14),
        max_expert_steps=60,
    ),
    "push_distractor": TaskSpec(
        name="push_distractor",
        kind="push",
        object_prompts=("red cross",),
        task_prompt_template="gripper fingers and the blue cube {relation}",
        horizons=HorizonConfig(obs_horizon=2, action_horizon=6),
    ),
}


@dataclass(frozen=True)
class EntityState:
    entity_id: str
    shape: str  # cube | cross | blob
    color: str
    x: float
    y: float
    pushable: bool = False


@dataclass(frozen=True)
class GripperState:
    x: float
    y: float
    closed: bool = False


@dataclass(frozen=True)
class WorldState:
    entities: tuple[EntityState, ...]
    gripper: GripperState
    held: str | None
    t: int
    target_id: str
    goal_id: str | None

    def entity(self, entity_id: str) -> EntityState:
        for e in self.entities:
            if e.entity_id == entity_id:
                return e
        raise KeyError(entity_id)


def world_to_pixel(x: float, y: float, config: WorldConfig) -> tuple[float, float]:
    """Project world coordinates to pixel coordinates (pixel-center convention)."""
    ppu = config.px_per_unit
    return (x * ppu - 0.5, (config.height - y) * ppu - 0.5)


def entity_pixel_summaries(state: WorldState, config: WorldConfig) -> tuple[EntitySummary, ...]:
    """Per-entity summaries with projected pixel centroids (occlusion-stable)."""
    out = []
    for e in state.entities:
        cx, cy = world_to_pixel(e.x, e.y, config)
        out.append(EntitySummary(entity_id=e.entity_id, shape=e.shape, color=e.color, centroid=(cx, cy)))
    return tuple(out)


def finger_centers(gripper: GripperState, config: WorldConfig) -> tuple[tuple[float, float], tuple[float, float]]:
    gap = config.finger_gap_closed if gripper.closed else config.finger_gap_open
    off = gap / 2.0 + config.finger_width / 2.0
    return ((gripper.x - off, gripper.y), (gripper.x + off, gripper.y))


def _finger_overlap(
    finger: tuple[float, float], entity: EntityState, config: WorldConfig
) -> tuple[float, float] | None:
    """(overlap_x, overlap_y) of a finger rect and a cube entity, or None."""
    fx, fy = finger
    hx = config.finger_width / 2.0 + config.cube_half
    hy = config.finger_height / 2.0 + config.cube_half
    dx = entity.x - fx
    dy = entity.y - fy
    ox = hx - abs(dx)
    oy = hy - abs(dy)
    if ox <= 0.0 or oy <= 0.0:
        return None
    return (math.copysign(ox, dx if dx != 0 else 1.0), math.copysign(oy, dy if dy != 0 else 1.0))


def _clamp_entity(x: float, y: float, half: float, config: WorldConfig) -> tuple[float, float]:
    return (
        min(max(x, half), config.width - half),
        min(max(y, half), config.height - half),
    )


def step(state: WorldState, action: ActionVector, config: WorldConfig) -> WorldState:
    """Advance one timestep. Deterministic; out-of-bounds targets are clamped."""
    tx = min(max(action.x, 0.0), config.width)
    ty = min(max(action.y, 0.0), config.height)
    gx, gy = state.gripper.x, state.gripper.y
    d = math.hypot(tx - gx, ty - gy)
    if d > config.v_max:
        gx += (tx - gx) / d * config.v_max
        gy += (ty - gy) / d * config.v_max
    else:
        gx, gy = tx, ty

    closed = action.grip == GRIP_CLOSED
    held = state.held
    entities = list(state.entities)
    index = {e.entity_id: i for i, e in enumerate(entities)}

    if not closed:
        held = None
    elif held is None:
        target = entities[index[state.target_id]]
        if target.pushable and math.hypot(target.x - gx, target.y - gy) <= config.grasp_radius:
            held = target.entity_id

    gripper = GripperState(x=gx, y=gy, closed=closed)

    if held is not None:
        i = index[held]
        entities[i] = replace(entities[i], x=gx, y=gy)

    fingers = finger_centers(gripper, config)
    for i, e in enumerate(entities):
        if not e.pushable or e.entity_id == held or e.shape != "cube":
            continue
        moved = e
        for finger in fingers:
            overlap = _finger_overlap(finger, moved, config)
            if overlap is None:
                continue
            ox, oy = overlap
            # displace along the axis of least penetration, away from the finger
            if abs(ox) <= abs(oy):
                moved = replace(moved, x=moved.x + ox)
            else:
                moved = replace(moved, y=moved.y + oy)
        if moved is not e:
            cx, cy = _clamp_entity(moved.x, moved.y, config.cube_half, config)
            entities[i] = replace(moved, x=cx, y=cy)

    return WorldState(
        entities=tuple(entities),
        gripper=gripper,
        held=held,
        t=state.t + 1,
        target_id=state.target_id,
        goal_id=state.goal_id,
    )


def check_success(state: WorldState, task: TaskSpec) -> bool:
    """Push: target within success_eps of the goal marker (boundary counts).
    Pick: target held with the gripper at or above lift_height."""
    target = state.entity(state.target_id)
    if task.kind == "push":
        assert state.goal_id is not None
        goal = state.entity(state.goal_id)
        return math.hypot(target.x - goal.x, target.y - goal.y) <= task.success_eps
    return state.held == state.target_id and state.gripper.y >= task.lift_height


def _sample_point(rng: np.random.Generator, box: tuple[float, float, float, float]) -> tuple[float, float]:
    x0, y0, x1, y1 = box
    return (float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))


_SPAWN_BOX = (9.0, 7.0, 23.0, 11.0)
_MIN_GOAL_SEPARATION = 7.0
_MIN_PAIR_SEPARATION = 4.0


def make_scene(
    task: TaskSpec,
    seed: int,
    shift: ShiftSpec = ShiftSpec(),
    config: WorldConfig = WorldConfig(),
) -> tuple[WorldState, PromptSet]:
    """Sample a solvable initial state and its prompts, deterministically by seed."""
    rng = np.random.default_rng(seed)
    entities: list[EntityState] = []
    relation = None

    if task.name == "push_distractor":
        while True:
            a = _sample_point(rng, _SPAWN_BOX)
            b = _sample_point(rng, _SPAWN_BOX)
            ref = _sample_point(rng, _SPAWN_BOX)
            goal = _sample_point(rng, _SPAWN_BOX)
            pts = (a, b, ref, goal)
            if min(
                math.dist(p, q) for i, p in enumerate(pts) for q in pts[i + 1 :]
            ) < _MIN_PAIR_SEPARATION:
                continue
            if math.dist(a, goal) < _MIN_GOAL_SEPARATION or math.dist(b, goal) < _MIN_GOAL_SEPARATION:
                continue
            # keep both relations decisive: distinct x and distinct reference distance
            if abs(a[0] - b[0]) < 1.0:
                continue
            if abs(math.dist(a, ref) - math.dist(b, ref)) < 1.0:
                continue
            break
        relation = RELATION_PHRASES[int(rng.integers(len(RELATION_PHRASES)))]
        entities.append(EntityState("blue_cube_0", "cube", "blue", a[0], a[1]))
        entities.append(EntityState("blue_cube_1", "cube", "blue", b[0], b[1]))
        entities.append(EntityState("yellow_cube", "cube", "yellow", ref[0], ref[1]))
        entities.append(EntityState("red_cross", "cross", "red", goal[0], goal[1]))
        goal_id = "red_cross"
    elif task.kind == "push":
        while True:
            cube = _sample_point(rng, _SPAWN_BOX)
            goal = _sample_point(rng, _SPAWN_BOX)
            if math.dist(cube, goal) >= _MIN_GOAL_SEPARATION:
                break
        entities.append(EntityState("blue_cube", "cube", "blue", cube[0], cube[1], pushable=True))
        entities.append(EntityState("red_cross", "cross", "red", goal[0], goal[1]))
        goal_id = "red_cross"
    else:  # pick
        cube = _sample_point(rng, (9.0, 4.0, 23.0, 8.0))
        entities.append(EntityState("blue_cube", "cube", "blue", cube[0], cube[1], pushable=True))
        goal_id = None

    task_prompt = task.task_prompt_template
    if "{relation}" in task_prompt:
        assert relation is not None
        task_prompt = task_prompt.format(relation=relation)

    # distractors: appearance-only entities placed clear of the task entities
    for k in range(shift.distractor_count):
        color = shift.distractor_palette[k % len(shift.distractor_palette)]
        shape = "cube" if k % 2 == 0 else "blob"
        while True:
            p = _sample_point(rng, (3.0, 3.0, 29.0, 15.0))
            if all(math.dist(p, (e.x, e.y)) >= 3.2 for e in entities) and math.dist(p, config.home) >= 3.0:
                break
        entities.append(EntityState(f"distractor_{k}", shape, color, p[0], p[1]))

    state = WorldState(
        entities=tuple(entities),
        gripper=GripperState(x=config.home[0], y=config.home[1], closed=False),
        held=None,
        t=0,
        target_id="",
        goal_id=goal_id,
    )

    prompt_set = PromptSet(object_prompts=task.object_prompts, task_prompt=task_prompt)

    # resolve the prompted target over pixel summaries, exactly as the pipeline will
    _, query = parse_task_prompt(task_prompt)
    assert query is not None
    target = resolve(query, entity_pixel_summaries(state, config))
    entities = [
        replace(e, pushable=(e.entity_id == target.entity_id)) for e in state.entities
    ]
    state = replace(state, entities=tuple(entities), target_id=target.entity_id)
    return state, prompt_set
