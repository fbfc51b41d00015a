"""Closed-loop policy evaluation in the simulator.

The policy sees exactly what it was trained on: every rendered frame passes
through the same per-episode FrameTransformer before entering the observation
window. A whole action chunk is executed before the next prediction.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from ..backends.base import BackendError, SessionInitError, StepContext
from ..core import GRIP_CLOSED, GRIP_OPEN, ActionVector, Episode, EpisodeStep
from ..pipeline import FrameTransformer, PipelineConfig
from ..sim.render import render
from ..sim.world import ShiftSpec, TaskSpec, WorldConfig, check_success, make_scene, step
from .model import Params, PolicyConfig, predict


@dataclass(frozen=True)
class RolloutResult:
    episode: Episode
    success: bool
    init_failed: bool = False


def _hold(state) -> ActionVector:
    grip = GRIP_CLOSED if state.gripper.closed else GRIP_OPEN
    return ActionVector(state.gripper.x, state.gripper.y, grip)


def rollout(
    params: Params,
    policy_config: PolicyConfig,
    task: TaskSpec,
    seed: int,
    pipeline_config: PipelineConfig,
    shift: ShiftSpec = ShiftSpec(),
    world_config: WorldConfig = WorldConfig(),
    max_steps: int = 90,
) -> RolloutResult:
    """Run one seeded episode under the policy; never raises on backend failure."""
    state, prompt_set = make_scene(task, seed, shift, world_config)
    transformer = FrameTransformer(pipeline_config)

    frame, gt_masks, gt_entities = render(state, shift, world_config)
    ctx = StepContext(gt_masks=gt_masks, gt_entities=gt_entities)
    if pipeline_config.variant == "vanilla":
        background_id = shift.background_id()
    else:
        background_id = pipeline_config.background_id()

    def make_episode(steps: list[EpisodeStep], success: bool) -> Episode:
        return Episode(
            task_id=task.name,
            prompt_set=prompt_set,
            steps=tuple(steps),
            background_id=background_id,
            success=success,
        )

    try:
        view = transformer.reset(frame, prompt_set, ctx)
    except (SessionInitError, BackendError):
        failed = [EpisodeStep(frame=frame, action=_hold(state), gt_masks=gt_masks, gt_entities=gt_entities)]
        return RolloutResult(episode=make_episode(failed, False), success=False, init_failed=True)

    window: deque = deque(maxlen=policy_config.obs_horizon)
    window.append(view)
    steps: list[EpisodeStep] = []
    done = check_success(state, task)

    while not done and len(steps) < max_steps:
        chunk = predict(params, policy_config, list(window))
        for action in chunk:
            steps.append(
                EpisodeStep(frame=view, action=action, gt_masks=gt_masks, gt_entities=gt_entities)
            )
            state = step(state, action, world_config)
            frame, gt_masks, gt_entities = render(state, shift, world_config)
            ctx = StepContext(gt_masks=gt_masks, gt_entities=gt_entities)
            try:
                view = transformer.step(frame, ctx)
            except BackendError:
                return RolloutResult(episode=make_episode(steps, False), success=False)
            window.append(view)
            done = check_success(state, task)
            if done or len(steps) >= max_steps:
                break

    # terminal frame with a hold action, so reward curves see the final state
    steps.append(EpisodeStep(frame=view, action=_hold(state), gt_masks=gt_masks, gt_entities=gt_entities))
    return RolloutResult(episode=make_episode(steps, done), success=done)
