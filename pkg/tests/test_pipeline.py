"""End-to-end recomposition pipeline: grounding, tracking, compositing, I/O."""

import json

import numpy as np
import pytest

from scenemask.backends.base import SessionInitError, StepContext
from scenemask.compositor import BackgroundSpec, make_background
from scenemask.core import Episode, PromptSet, ValidationError
from scenemask.pipeline import (
    GRIPPER_TRACK_LABELS,
    BackendConfig,
    FrameTransformer,
    PipelineConfig,
    init_tracks,
    make_backend,
    slug,
    transform_dataset,
    transform_episode,
)
from scenemask.episode_io import load_episode, save_episode
from scenemask.sim.dataset import run_expert_episode
from scenemask.sim.world import TASKS

PUSH = TASKS["push"]
TRACKED_GT_KEYS = ("blue_cube", "gripper_left", "gripper_right", "red_cross")


@pytest.fixture(scope="module")
def push_episode():
    return run_expert_episode(PUSH, seed=12, action_noise=0.0)


def gt_union(step, keys=TRACKED_GT_KEYS):
    acc = np.zeros_like(step.gt_masks["blue_cube"].pixels)
    for key in keys:
        acc |= step.gt_masks[key].pixels
    return acc.astype(bool)


# -------------------------------------------------------------- configuration


def test_pipeline_config_pins_backgrounds():
    assert PipelineConfig(variant="vanilla").background is None
    assert PipelineConfig(variant="masked").background.kind == "black"
    assert PipelineConfig(variant="arro").background.kind == "grid"
    with pytest.raises(ValidationError):
        PipelineConfig(variant="vanilla", background=BackgroundSpec(kind="black"))
    with pytest.raises(ValidationError):
        PipelineConfig(variant="masked", background=BackgroundSpec(kind="grid"))
    with pytest.raises(ValidationError):
        PipelineConfig(variant="arro", background=BackgroundSpec(kind="black"))
    with pytest.raises(ValidationError):
        PipelineConfig(variant="augmented")


def test_pipeline_config_background_id():
    config = PipelineConfig(variant="arro")
    assert config.background_id() == "arro:" + config.background.key()


def test_backend_config_validation():
    with pytest.raises(ValidationError):
        BackendConfig(kind="sam")
    with pytest.raises(ValidationError):
        BackendConfig(tau_iou=0.0)
    with pytest.raises(ValidationError):
        BackendConfig(tau_color=-1.0)
    assert make_backend(BackendConfig(kind="oracle")).name == "oracle"
    assert make_backend(BackendConfig(kind="color")).name == "color"


def test_slug():
    assert slug("red cross") == "red_cross"
    assert slug("  Big, Blue Cube! ") == "big_blue_cube"
    assert slug("!!!") == "object"


# ----------------------------------------------------------------- init_tracks


@pytest.mark.parametrize("kind", ["oracle", "color"])
def test_init_tracks_opens_four_tracks_with_two_fingers(push_episode, kind):
    backend = make_backend(BackendConfig(kind=kind))
    first = push_episode.steps[0]
    ctx = StepContext(gt_masks=first.gt_masks, gt_entities=first.gt_entities)
    session = init_tracks(backend, first.frame, push_episode.prompt_set, ctx)
    assert len(session.track_ids) == 4
    fingers = [t for t in session.track_ids if t in GRIPPER_TRACK_LABELS]
    assert sorted(fingers) == sorted(GRIPPER_TRACK_LABELS)
    assert "red_cross" in session.track_ids  # box route, named by prompt slug
    assert "object_0" in session.track_ids  # task-prompt object route
    # finger keypoints must land on the true finger masks, left left of right
    left = session.init_masks["gripper_left"]
    right = session.init_masks["gripper_right"]
    assert left == first.gt_masks["gripper_left"]
    assert right == first.gt_masks["gripper_right"]


def test_init_tracks_fails_fast_on_missing_object(push_episode):
    backend = make_backend(BackendConfig(kind="oracle"))
    first = push_episode.steps[0]
    ctx = StepContext(gt_masks=first.gt_masks, gt_entities=first.gt_entities)
    prompts = PromptSet(object_prompts=("purple blob",), task_prompt="gripper fingers")
    with pytest.raises(SessionInitError, match="purple blob"):
        init_tracks(backend, first.frame, prompts, ctx)


# ------------------------------------------------------------------ transforms


def test_vanilla_transform_is_identity(push_episode):
    out = transform_episode(push_episode, PipelineConfig(variant="vanilla"))
    assert out is push_episode


def test_arro_transform_keeps_foreground_and_paints_grid(push_episode):
    config = PipelineConfig(variant="arro", backend=BackendConfig(kind="oracle"))
    out = transform_episode(push_episode, config)
    assert out.background_id == config.background_id()
    assert out.task_id == push_episode.task_id
    assert out.success == push_episode.success
    assert len(out.steps) == len(push_episode.steps)
    # actions and ground truth ride through unchanged
    assert [s.action for s in out.steps] == [s.action for s in push_episode.steps]
    assert out.steps[3].gt_masks == push_episode.steps[3].gt_masks

    w, h = push_episode.width, push_episode.height
    grid = make_background(config.background, w, h).pixels
    for t in (0, 1, len(out.steps) - 1):
        orig = push_episode.steps[t].frame.pixels
        new = out.steps[t].frame.pixels
        keep = gt_union(push_episode.steps[t])
        assert np.array_equal(new[keep], orig[keep]), f"frame {t}: foreground altered"
        assert np.array_equal(new[~keep], grid[~keep]), f"frame {t}: background not the grid"


def test_masked_transform_blacks_out_background(push_episode):
    config = PipelineConfig(variant="masked", backend=BackendConfig(kind="oracle"))
    out = transform_episode(push_episode, config)
    t = len(out.steps) // 2
    keep = gt_union(push_episode.steps[t])
    new = out.steps[t].frame.pixels
    assert np.array_equal(new[keep], push_episode.steps[t].frame.pixels[keep])
    assert not new[~keep].any()


def test_color_backend_transform_matches_oracle_on_clean_scenes(push_episode):
    # on the unshifted table the color tracker should recover the gt masks
    oracle = transform_episode(
        push_episode, PipelineConfig(variant="arro", backend=BackendConfig(kind="oracle"))
    )
    color = transform_episode(
        push_episode, PipelineConfig(variant="arro", backend=BackendConfig(kind="color"))
    )
    total = 0
    differing = 0
    for a, b in zip(oracle.steps, color.steps):
        total += a.frame.pixels.size
        differing += int((a.frame.pixels != b.frame.pixels).sum())
    assert differing / total < 0.01


def test_live_and_batch_transforms_are_byte_identical(push_episode):
    config = PipelineConfig(variant="arro", backend=BackendConfig(kind="oracle"))
    batch = transform_episode(push_episode, config)
    live = FrameTransformer(config)
    for t, step in enumerate(push_episode.steps):
        ctx = StepContext(gt_masks=step.gt_masks, gt_entities=step.gt_entities)
        if t == 0:
            frame = live.reset(step.frame, push_episode.prompt_set, ctx)
        else:
            frame = live.step(step.frame, ctx)
        assert frame == batch.steps[t].frame, f"frame {t} differs between live and batch"


def test_frame_transformer_step_before_reset_is_an_error(push_episode):
    live = FrameTransformer(PipelineConfig(variant="arro"))
    with pytest.raises(ValidationError):
        live.step(push_episode.steps[0].frame)


def test_frame_transformer_vanilla_passthrough(push_episode):
    live = FrameTransformer(PipelineConfig(variant="vanilla"))
    f0 = push_episode.steps[0].frame
    assert live.reset(f0, push_episode.prompt_set) is f0
    assert live.step(push_episode.steps[1].frame) is push_episode.steps[1].frame


# --------------------------------------------------------------------- dataset


def test_transform_dataset_writes_outputs_and_manifest(tmp_path, push_episode):
    src = tmp_path / "raw"
    second = run_expert_episode(PUSH, seed=13, action_noise=0.0)
    save_episode(src / "ep_000", push_episode)
    save_episode(src / "ep_001", second)
    # an episode whose object prompt cannot ground: recorded as failed
    broken = Episode(
        task_id=push_episode.task_id,
        prompt_set=PromptSet(object_prompts=("purple blob",), task_prompt="gripper fingers"),
        steps=push_episode.steps,
        background_id=push_episode.background_id,
        success=push_episode.success,
    )
    save_episode(src / "ep_002", broken)

    out = tmp_path / "arro"
    config = PipelineConfig(variant="arro", backend=BackendConfig(kind="oracle"))
    manifest = transform_dataset(src, out, config)
    assert manifest["ep_000"] == {"status": "ok"}
    assert manifest["ep_001"] == {"status": "ok"}
    assert manifest["ep_002"]["status"] == "failed"
    assert "purple blob" in manifest["ep_002"]["reason"]
    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk == manifest

    loaded = load_episode(out / "ep_000")
    expected = transform_episode(push_episode, config)
    assert loaded.steps[0].frame == expected.steps[0].frame
    assert not (out / "ep_002").exists() or not any((out / "ep_002").iterdir())


def test_transform_dataset_parallel_matches_serial(tmp_path, push_episode):
    src = tmp_path / "raw"
    save_episode(src / "ep_000", push_episode)
    save_episode(src / "ep_001", run_expert_episode(PUSH, seed=14, action_noise=0.0))
    config = PipelineConfig(variant="masked", backend=BackendConfig(kind="oracle"))
    m1 = transform_dataset(src, tmp_path / "serial", config, workers=1)
    m2 = transform_dataset(src, tmp_path / "parallel", config, workers=2)
    assert m1 == m2
    for name in ("ep_000", "ep_001"):
        a = (tmp_path / "serial" / name / "frame_000000.png").read_bytes()
        b = (tmp_path / "parallel" / name / "frame_000000.png").read_bytes()
        assert a == b
