"""Deterministic 2D manipulation simulator: kinematic gripper, pushable cube."""

from .world import (
    TASKS,
    EntityState,
    GripperState,
    ShiftSpec,
    TaskSpec,
    WorldConfig,
    WorldState,
    check_success,
    entity_pixel_summaries,
    make_scene,
    step,
)
from .render import render
from .expert import scripted_expert
from .dataset import collect_episodes, generate_dataset, run_expert_episode

__all__ = [
    "TASKS",
    "EntityState",
    "GripperState",
    "ShiftSpec",
    "TaskSpec",
    "WorldConfig",
    "WorldState",
    "check_success",
    "collect_episodes",
    "entity_pixel_summaries",
    "generate_dataset",
    "make_scene",
    "render",
    "run_expert_episode",
    "scripted_expert",
    "step",
]
