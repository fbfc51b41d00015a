"""Demonstration generation: roll the scripted expert and record episodes."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..core import GRIP_CLOSED, GRIP_OPEN, ActionVector, Episode, EpisodeStep
from ..episode_io import save_episode
from .expert import scripted_expert
from .render import render
from .world import ShiftSpec, TaskSpec, WorldConfig, check_success, make_scene, step

# Demonstrations carry seeded waypoint jitter by default. The expert replans
# every step, so it still succeeds, but the recorded trajectories cover a tube
# around the nominal path instead of a single line — a cloned policy that
# drifts slightly then sees states it has labels for. Zero disables it.
DEFAULT_ACTION_NOISE = 1.0


def run_expert_episode(
    task: TaskSpec,
    seed: int,
    shift: ShiftSpec = ShiftSpec(),
    config: WorldConfig = WorldConfig(),
    action_noise: float = DEFAULT_ACTION_NOISE,
) -> Episode:
    """Roll the scripted expert from a seeded scene until success or timeout.

    Every step stores the frame, the action executed from it, and ground
    truth. With action_noise > 0, the expert's waypoint gets seeded Gaussian
    jitter on (x, y) — grip untouched — and the jittered action is both
    executed and recorded, so episodes stay replayable. The terminal frame
    records a hold action so policies learn to stop.
    """
    state, prompt_set = make_scene(task, seed, shift, config)
    rng = np.random.default_rng((seed, 211))
    steps: list[EpisodeStep] = []
    done = False
    for _ in range(task.max_expert_steps):
        frame, gt_masks, gt_entities = render(state, shift, config)
        done = check_success(state, task)
        if done:
            grip = GRIP_CLOSED if state.gripper.closed else GRIP_OPEN
            action = ActionVector(state.gripper.x, state.gripper.y, grip)
        else:
            action = scripted_expert(state, task, config)
            if action_noise > 0.0:
                jx, jy = rng.normal(0.0, action_noise, size=2)
                action = ActionVector(
                    min(max(action.x + jx, 0.0), config.width),
                    min(max(action.y + jy, 0.0), config.height),
                    action.grip,
                )
        steps.append(
            EpisodeStep(frame=frame, action=action, gt_masks=gt_masks, gt_entities=gt_entities)
        )
        if done:
            break
        state = step(state, action, config)

    return Episode(
        task_id=task.name,
        prompt_set=prompt_set,
        steps=tuple(steps),
        background_id=shift.background_id(),
        success=done,
    )


def collect_episodes(
    task: TaskSpec,
    n: int,
    base_seed: int = 0,
    shift: ShiftSpec = ShiftSpec(),
    config: WorldConfig = WorldConfig(),
    action_noise: float = DEFAULT_ACTION_NOISE,
) -> list[Episode]:
    """First n successful expert episodes from the seed sequence base_seed, base_seed+1, ..."""
    episodes: list[Episode] = []
    seed = base_seed
    attempts = 0
    while len(episodes) < n:
        if attempts >= max(4 * n, 50):
            raise RuntimeError(
                f"expert produced only {len(episodes)}/{n} successes after {attempts} attempts"
            )
        episode = run_expert_episode(task, seed, shift, config, action_noise)
        if episode.success:
            episodes.append(episode)
        seed += 1
        attempts += 1
    return episodes


def generate_dataset(
    out_dir: str | Path,
    task: TaskSpec,
    n: int,
    base_seed: int = 0,
    shift: ShiftSpec = ShiftSpec(),
    config: WorldConfig = WorldConfig(),
    overwrite: bool = False,
    action_noise: float = DEFAULT_ACTION_NOISE,
) -> list[Path]:
    """Write n successful expert episodes under out_dir/ep_%05d."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, episode in enumerate(collect_episodes(task, n, base_seed, shift, config, action_noise)):
        dest = out / f"ep_{i:05d}"
        save_episode(dest, episode, overwrite=overwrite)
        paths.append(dest)
    return paths
