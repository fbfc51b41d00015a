import numpy as np
import pytest

from scenemask.core import (
    GRIP_CLOSED,
    GRIP_OPEN,
    ActionVector,
    BinaryMask,
    BoundingBox,
    Episode,
    EpisodeStep,
    EntitySummary,
    Frame,
    HorizonConfig,
    Keypoint,
    PromptSet,
    ValidationError,
)


def test_frame_shape_and_dtype_validation():
    with pytest.raises(ValidationError):
        Frame(np.zeros((4, 4, 3), dtype=np.float64))
    with pytest.raises(ValidationError):
        Frame(np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(ValidationError):
        Frame(np.zeros((4, 4, 4), dtype=np.uint8))
    f = Frame.full(6, 4, (10, 20, 30))
    assert (f.width, f.height) == (6, 4)
    assert f.pixels[0, 0].tolist() == [10, 20, 30]


def test_frame_pixels_are_readonly():
    f = Frame.full(4, 4, (1, 2, 3))
    with pytest.raises(ValueError):
        f.pixels[0, 0, 0] = 9


def test_frame_equality_and_hash():
    a = Frame.full(4, 4, (1, 2, 3))
    b = Frame.full(4, 4, (1, 2, 3))
    c = Frame.full(4, 4, (1, 2, 4))
    assert a == b and hash(a) == hash(b)
    assert a != c


def test_mask_entries_must_be_binary():
    with pytest.raises(ValidationError):
        BinaryMask(np.full((3, 3), 2, dtype=np.uint8))
    m = BinaryMask.from_bool(np.eye(3, dtype=bool))
    assert m.area == 3
    assert not m.is_empty()
    assert BinaryMask.zeros(3, 3).is_empty()


def test_bounding_box_invariants():
    with pytest.raises(ValidationError):
        BoundingBox(5, 0, 5, 4)
    with pytest.raises(ValidationError):
        BoundingBox(-1, 0, 4, 4)
    with pytest.raises(ValidationError):
        BoundingBox(0.5, 0, 4, 4)
    b = BoundingBox(1, 2, 4, 6)
    assert (b.width, b.height) == (3, 4)
    b.check_within(4, 6)
    with pytest.raises(ValidationError):
        b.check_within(3, 6)
    assert b.to_mask(4, 6).area == 12


def test_keypoint_and_entity_summary():
    with pytest.raises(ValidationError):
        Keypoint(-1, 0, "a")
    with pytest.raises(ValidationError):
        Keypoint(0, 0, "")
    with pytest.raises(ValidationError):
        EntitySummary("e", "cube", "blue", (float("nan"), 0.0))
    e = EntitySummary("e", "cube", "blue", (1, 2))
    assert e.centroid == (1.0, 2.0)


def test_action_vector_grip_values():
    with pytest.raises(ValidationError):
        ActionVector(0.0, 0.0, 2)
    with pytest.raises(ValidationError):
        ActionVector(float("inf"), 0.0, GRIP_OPEN)
    a = ActionVector(1, 2, GRIP_CLOSED)
    assert (a.x, a.y, a.grip) == (1.0, 2.0, 1)


def test_prompt_set_rejects_blank_prompts():
    with pytest.raises(ValidationError):
        PromptSet(("",), "task")
    with pytest.raises(ValidationError):
        PromptSet((), " ")
    ps = PromptSet(["red cross"], "gripper fingers")
    assert ps.object_prompts == ("red cross",)


def test_episode_step_checks_mask_sizes():
    frame = Frame.full(4, 4, (0, 0, 0))
    with pytest.raises(ValidationError):
        EpisodeStep(frame, ActionVector(0, 0, 0), gt_masks={"a": BinaryMask.zeros(5, 4)})
    step = EpisodeStep(frame, ActionVector(0, 0, 0), gt_masks={"a": BinaryMask.zeros(4, 4)})
    assert set(step.gt_masks) == {"a"}


def test_episode_requires_consistent_frames():
    ps = PromptSet((), "gripper fingers")
    s1 = EpisodeStep(Frame.full(4, 4, (0, 0, 0)), ActionVector(0, 0, 0))
    s2 = EpisodeStep(Frame.full(5, 4, (0, 0, 0)), ActionVector(0, 0, 0))
    with pytest.raises(ValidationError):
        Episode("t", ps, (s1, s2), "plain", False)
    with pytest.raises(ValidationError):
        Episode("t", ps, (), "plain", False)
    ep = Episode("t", ps, (s1, s1), "plain", True)
    assert len(ep) == 2
    assert ep.actions == (ActionVector(0, 0, 0), ActionVector(0, 0, 0))
    assert (ep.width, ep.height) == (4, 4)


def test_horizon_config_bounds():
    with pytest.raises(ValidationError):
        HorizonConfig(obs_horizon=0)
    with pytest.raises(ValidationError):
        HorizonConfig(action_horizon=0)
    h = HorizonConfig()
    assert (h.obs_horizon, h.action_horizon) == (2, 6)
