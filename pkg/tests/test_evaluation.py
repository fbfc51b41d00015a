"""Reward curves, the spatial-reference suite, and experiment matrices."""

import json

import numpy as np
import pytest

from scenemask.core import (
    ActionVector,
    EntitySummary,
    Episode,
    EpisodeStep,
    Frame,
    PromptSet,
    ValidationError,
)
from scenemask.evaluation import (
    CellResult,
    MatrixSpec,
    brute_force_resolve,
    evaluate_cell,
    pipeline_for_variant,
    results_csv,
    results_markdown,
    results_svg,
    reward_curve,
    run_matrix,
    spatial_suite,
)
from scenemask.pipeline import BackendConfig, PipelineConfig
from scenemask.policy.model import PolicyConfig, init_params
from scenemask.prompt import parse_prompt
from scenemask.sim.world import TASKS, ShiftSpec

PUSH = TASKS["push"]


def blank_frame():
    return Frame(np.zeros((20, 20, 3), dtype=np.uint8))


def push_step(cube_xy, goal_xy=(100.0, 50.0)):
    entities = (
        EntitySummary("blue_cube", "cube", "blue", cube_xy),
        EntitySummary("red_cross", "cross", "red", goal_xy),
    )
    return EpisodeStep(
        frame=blank_frame(), action=ActionVector(0, 0, 0), gt_entities=entities
    )


def push_episode(cube_positions):
    return Episode(
        task_id="push",
        prompt_set=PromptSet(
            object_prompts=("red cross",), task_prompt="gripper fingers and the blue cube"
        ),
        steps=tuple(push_step(p) for p in cube_positions),
        background_id="plain",
        success=True,
    )


# ------------------------------------------------------------------ reward


def test_reward_curve_tracks_normalized_progress():
    episode = push_episode([(0.0, 50.0), (50.0, 50.0), (75.0, 50.0), (100.0, 50.0)])
    curve = reward_curve(episode, PUSH)
    assert curve == pytest.approx([0.0, 0.5, 0.75, 1.0])


def test_reward_curve_clips_regressions_at_zero():
    episode = push_episode([(50.0, 50.0), (0.0, 50.0)])  # moved farther away
    assert reward_curve(episode, PUSH) == pytest.approx([0.0, 0.0])


def test_reward_curve_trivial_start_scores_one():
    episode = push_episode([(100.0, 50.0), (100.0, 50.0)])
    assert reward_curve(episode, PUSH) == pytest.approx([1.0, 1.0])


def test_reward_curve_requires_ground_truth():
    steps = (EpisodeStep(frame=blank_frame(), action=ActionVector(0, 0, 0)),)
    episode = Episode(
        task_id="push",
        prompt_set=PromptSet(object_prompts=("red cross",), task_prompt="the blue cube"),
        steps=steps,
        background_id="plain",
        success=False,
    )
    with pytest.raises(ValidationError, match="ground truth"):
        reward_curve(episode, PUSH)


# ---------------------------------------------------------- spatial suite


def entity(eid, color, shape, x, y=0.0):
    return EntitySummary(eid, shape, color, (x, y))


def test_brute_force_resolver_basics():
    entities = (
        entity("a", "blue", "cube", 10.0),
        entity("b", "blue", "cube", 90.0),
        entity("ref", "yellow", "cube", 80.0),
    )
    assert brute_force_resolve(parse_prompt("the blue cube on the left"), entities) == "a"
    assert brute_force_resolve(parse_prompt("the blue cube on the right"), entities) == "b"
    closer = parse_prompt("the blue cube that is closer to the yellow cube")
    farther = parse_prompt("the blue cube that is farther from the yellow cube")
    assert brute_force_resolve(closer, entities) == "b"
    assert brute_force_resolve(farther, entities) == "a"


def test_brute_force_resolver_error_cases():
    lone = (entity("a", "blue", "cube", 10.0),)
    with pytest.raises(ValidationError):
        brute_force_resolve(parse_prompt("the red cube"), lone)
    two = lone + (entity("b", "blue", "cube", 20.0),)
    with pytest.raises(ValidationError, match="ambiguous"):
        brute_force_resolve(parse_prompt("the blue cube"), two)


def test_spatial_suite_resolver_agrees_with_oracle():
    result = spatial_suite(n_scenes=250, seed=1, n_mirror=60)
    assert result.passed, result.failures
    assert result.n_agree == 250
    assert result.n_mirror_ok == 60


# ------------------------------------------------------------------ matrix


def zero_policy():
    config = PolicyConfig()
    params = init_params(config, seed=0)
    for k in ("W1", "W2", "W3", "b1", "b2", "b3"):
        params[k] = np.zeros_like(params[k])
    return params, config


def test_evaluate_cell_exact_statistics():
    params, config = zero_policy()
    cell = evaluate_cell(
        PUSH,
        params,
        config,
        pipeline_for_variant("vanilla", BackendConfig(kind="oracle")),
        ShiftSpec(),
        trials=3,
        base_seed=500,
        max_steps=6,
    )
    assert cell.trials == 3
    assert float(cell.success_rate) == 0.0
    assert cell.episode_ids == (
        "push-unshifted-vanilla-s500",
        "push-unshifted-vanilla-s501",
        "push-unshifted-vanilla-s502",
    )
    assert 0.0 <= cell.reward_mean <= 1.0
    assert cell.reward_std >= 0.0
    payload = cell.to_json()
    assert payload["trials"] == 3
    assert payload["success_rate"] == 0.0


def test_pipeline_for_variant():
    backend = BackendConfig(kind="oracle")
    assert pipeline_for_variant("vanilla", backend).background is None
    assert pipeline_for_variant("masked", backend).background.kind == "black"
    assert pipeline_for_variant("arro", backend).background.kind == "grid"


def test_matrix_spec_validation():
    with pytest.raises(ValidationError):
        MatrixSpec(task_name="juggle", variants={}, conditions={"unshifted": ShiftSpec()})
    with pytest.raises(ValidationError):
        MatrixSpec(task_name="push", variants={"fancy": None}, conditions={"u": ShiftSpec()})
    with pytest.raises(ValidationError):
        MatrixSpec(task_name="push", variants={"vanilla": None}, conditions={})


def test_run_matrix_writes_deterministic_reports(tmp_path):
    params, config = zero_policy()
    spec = MatrixSpec(
        task_name="push",
        variants={"vanilla": (params, config), "arro": None},
        conditions={"unshifted": ShiftSpec()},
        trials=2,
        base_seed=900,
        backend=BackendConfig(kind="oracle"),
        max_steps=6,
    )
    results = run_matrix(spec, out_dir=tmp_path / "a")
    assert results["push"]["arro"]["unshifted"] == {"status": "missing_model"}
    cell = results["push"]["vanilla"]["unshifted"]
    assert cell["trials"] == 2
    for name in ("results.json", "results.csv", "results.md", "results.svg"):
        assert (tmp_path / "a" / name).exists(), name
    on_disk = json.loads((tmp_path / "a" / "results.json").read_text())
    assert on_disk == results

    run_matrix(spec, out_dir=tmp_path / "b")
    for name in ("results.json", "results.csv", "results.md", "results.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_report_renderers_cover_all_cells():
    results = {
        "push": {
            "vanilla": {
                "unshifted": {
                    "success_rate": 0.5,
                    "reward_mean": 0.6,
                    "reward_std": 0.1,
                    "trials": 2,
                    "episode_ids": ["push-unshifted-vanilla-s0"],
                },
                "texture": {"status": "missing_model"},
            }
        }
    }
    csv_text = results_csv(results)
    assert "push,vanilla,unshifted,ok,0.5000" in csv_text
    assert "push,vanilla,texture,missing_model" in csv_text
    md = results_markdown(results)
    assert "| vanilla | unshifted | 0.50 |" in md
    assert "missing_model" in md
    svg = results_svg(results)
    assert svg.startswith("<svg ") and svg.rstrip().endswith("</svg>")
    assert 'height="' in svg and "vanilla/unshifted" in svg
    # empty results still render a valid chart frame
    assert results_svg({}).startswith("<svg ")


def test_cell_result_fraction_survives_serialization():
    from fractions import Fraction

    cell = CellResult(
        success_rate=Fraction(2, 3),
        reward_mean=0.5,
        reward_std=0.0,
        trials=3,
        episode_ids=("a", "b", "c"),
    )
    assert cell.to_json()["success_rate"] == pytest.approx(2 / 3)
