"""Experiment harness: reward curves, spatial-reference checks, result matrices.

Success rates are exact fractions until serialization; reward statistics use
compensated summation. Every artifact (JSON, CSV, markdown, SVG) is a pure
function of the results, so repeated runs produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .core import EntitySummary, Episode, ValidationError
from .pipeline import BackendConfig, PipelineConfig
from .policy.model import Params, PolicyConfig
from .policy.rollout import rollout
from .prompt import PromptQuery, parse_prompt, parse_task_prompt, resolve
from .sim.world import TASKS, ShiftSpec, TaskSpec, WorldConfig, world_to_pixel

VARIANT_ORDER = ("vanilla", "masked", "arro")


# --------------------------------------------------------------------------
# reward curves


def _summary_for(entities: tuple[EntitySummary, ...], entity_id: str) -> EntitySummary:
    for e in entities:
        if e.entity_id == entity_id:
            return e
    raise ValidationError(f"entity {entity_id!r} missing from episode ground truth")


def reward_curve(episode: Episode, task: TaskSpec, config: WorldConfig = WorldConfig()) -> list[float]:
    """Per-step progress r_t = max(0, 1 - d_t / d_0), from pixel centroids.

    Push tasks measure target-to-goal-marker distance (the goal marker is the
    episode's prompted object); pick tasks measure the remaining vertical
    pixel distance to the lift height. A trivially solved start (d_0 = 0)
    scores 1 everywhere.
    """
    if not episode.steps:
        raise ValidationError("empty episode")
    first = episode.steps[0].gt_entities
    if not first:
        raise ValidationError("episode lacks entity ground truth; cannot score")
    _, query = parse_task_prompt(episode.prompt_set.task_prompt)
    if query is None:
        raise ValidationError("task prompt names no object to score against")
    target_id = resolve(query, first).entity_id

    if task.kind == "push":
        if not episode.prompt_set.object_prompts:
            raise ValidationError("push episode has no goal-marker prompt")
        goal_query = parse_prompt(episode.prompt_set.object_prompts[0])
        goal_id = resolve(goal_query, first).entity_id

        def dist(entities: tuple[EntitySummary, ...]) -> float:
            t = _summary_for(entities, target_id).centroid
            g = _summary_for(entities, goal_id).centroid
            return math.hypot(t[0] - g[0], t[1] - g[1])

    else:
        _, lift_py = world_to_pixel(0.0, task.lift_height, config)

        def dist(entities: tuple[EntitySummary, ...]) -> float:
            t = _summary_for(entities, target_id).centroid
            return max(0.0, t[1] - lift_py)

    d0 = dist(first)
    out = []
    for step in episode.steps:
        if d0 == 0.0:
            out.append(1.0)
        else:
            out.append(max(0.0, 1.0 - dist(step.gt_entities) / d0))
    return out


# --------------------------------------------------------------------------
# spatial-reference resolution, checked against a brute-force re-implementation


def _matches(e: EntitySummary, color: str, shape: str) -> bool:
    return e.color == color and e.shape == shape


def brute_force_resolve(query: PromptQuery, entities: tuple[EntitySummary, ...]) -> str:
    """Independent spatial resolver used as an oracle: explicit pairwise scans."""
    candidates = [e for e in entities if _matches(e, query.color, query.shape)]
    if not candidates:
        raise ValidationError("brute force: no candidate")

    if query.relation is None:
        if len(candidates) != 1:
            raise ValidationError("brute force: ambiguous")
        return candidates[0].entity_id

    if query.relation in ("left", "right"):
        for a in candidates:
            beaten = False
            for b in candidates:
                if b is a:
                    continue
                if query.relation == "left" and b.centroid[0] < a.centroid[0]:
                    beaten = True
                if query.relation == "right" and b.centroid[0] > a.centroid[0]:
                    beaten = True
            if not beaten:
                return a.entity_id
        raise ValidationError("brute force: no extremum")

    refs = [e for e in entities if _matches(e, query.ref_color, query.ref_shape)]
    if len(refs) != 1:
        raise ValidationError("brute force: reference not unique")
    ref = refs[0]
    pool = [e for e in candidates if e.entity_id != ref.entity_id]
    for a in pool:
        da = math.hypot(a.centroid[0] - ref.centroid[0], a.centroid[1] - ref.centroid[1])
        beaten = False
        for b in pool:
            if b is a:
                continue
            db = math.hypot(b.centroid[0] - ref.centroid[0], b.centroid[1] - ref.centroid[1])
            if query.relation == "closer" and db < da:
                beaten = True
            if query.relation == "farther" and db > da:
                beaten = True
        if not beaten:
            return a.entity_id
    raise ValidationError("brute force: no extremum")


_SPATIAL_RELATIONS = (None, "left", "right", "closer", "farther")
_DISTRACTOR_SPECS = (("red", "cross"), ("green", "blob"), ("purple", "cube"), ("orange", "blob"))


def _random_scene(
    rng: np.random.Generator,
) -> tuple[PromptQuery, tuple[EntitySummary, ...]]:
    """A solvable scene: decisive margins, unique reference, >= 1 candidate."""
    relation = _SPATIAL_RELATIONS[int(rng.integers(len(_SPATIAL_RELATIONS)))]
    n_candidates = 1 if relation is None else int(rng.integers(2, 5))

    entities: list[EntitySummary] = []
    taken_x: list[float] = []

    def sample_point() -> tuple[float, float]:
        while True:
            x = float(rng.integers(0, 1001))
            y = float(rng.integers(0, 601))
            if all(abs(x - tx) >= 2.0 for tx in taken_x):
                taken_x.append(x)
                return (x, y)

    ref: EntitySummary | None = None
    if relation in ("closer", "farther"):
        ref = EntitySummary("ref", "cube", "yellow", sample_point())
        entities.append(ref)

    k = 0
    while k < n_candidates:
        p = sample_point()
        if ref is not None:
            d = math.hypot(p[0] - ref.centroid[0], p[1] - ref.centroid[1])
            others = [
                math.hypot(e.centroid[0] - ref.centroid[0], e.centroid[1] - ref.centroid[1])
                for e in entities
                if e.entity_id.startswith("cand")
            ]
            if any(abs(d - od) < 2.0 for od in others):
                taken_x.pop()
                continue
        entities.append(EntitySummary(f"cand_{k}", "cube", "blue", p))
        k += 1

    for i in range(int(rng.integers(0, 4))):
        color, shape = _DISTRACTOR_SPECS[int(rng.integers(len(_DISTRACTOR_SPECS)))]
        entities.append(EntitySummary(f"extra_{i}", shape, color, sample_point()))

    query = PromptQuery(
        color="blue",
        shape="cube",
        relation=relation,
        ref_color="yellow" if ref is not None else None,
        ref_shape="cube" if ref is not None else None,
    )
    order = rng.permutation(len(entities))
    return query, tuple(entities[i] for i in order)


def _mirror(entities: tuple[EntitySummary, ...]) -> tuple[EntitySummary, ...]:
    return tuple(
        EntitySummary(e.entity_id, e.shape, e.color, (1000.0 - e.centroid[0], e.centroid[1]))
        for e in entities
    )


@dataclass(frozen=True)
class SpatialSuiteResult:
    n_scenes: int
    n_agree: int
    n_mirror: int
    n_mirror_ok: int
    failures: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.n_agree == self.n_scenes and self.n_mirror_ok == self.n_mirror


def spatial_suite(n_scenes: int = 1000, seed: int = 0, n_mirror: int = 100) -> SpatialSuiteResult:
    """Compare the resolver against the brute-force oracle, plus mirror checks.

    Mirroring x -> 1000 - x must swap left/right answers and leave
    closer/farther answers unchanged.
    """
    rng = np.random.default_rng(seed)
    agree = 0
    failures: list[str] = []
    for i in range(n_scenes):
        query, entities = _random_scene(rng)
        got = resolve(query, entities).entity_id
        expected = brute_force_resolve(query, entities)
        if got == expected:
            agree += 1
        elif len(failures) < 5:
            failures.append(f"scene {i}: resolver {got!r} != oracle {expected!r} ({query})")

    mirror_ok = 0
    done = 0
    while done < n_mirror:
        query, entities = _random_scene(rng)
        mirrored = _mirror(entities)
        if query.relation in ("left", "right"):
            flipped = PromptQuery(
                color=query.color,
                shape=query.shape,
                relation="right" if query.relation == "left" else "left",
                ref_color=query.ref_color,
                ref_shape=query.ref_shape,
            )
            ok = resolve(flipped, mirrored).entity_id == resolve(query, entities).entity_id
        else:
            ok = resolve(query, mirrored).entity_id == resolve(query, entities).entity_id
        if ok:
            mirror_ok += 1
        elif len(failures) < 10:
            failures.append(f"mirror pair {done}: answers diverged ({query})")
        done += 1

    return SpatialSuiteResult(
        n_scenes=n_scenes,
        n_agree=agree,
        n_mirror=n_mirror,
        n_mirror_ok=mirror_ok,
        failures=tuple(failures),
    )


# --------------------------------------------------------------------------
# experiment matrix


@dataclass(frozen=True)
class CellResult:
    success_rate: Fraction
    reward_mean: float
    reward_std: float
    trials: int
    episode_ids: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "success_rate": float(self.success_rate),
            "reward_mean": self.reward_mean,
            "reward_std": self.reward_std,
            "trials": self.trials,
            "episode_ids": list(self.episode_ids),
        }


def pipeline_for_variant(variant: str, backend: BackendConfig) -> PipelineConfig:
    if variant == "vanilla":
        return PipelineConfig(variant="vanilla", background=None, backend=backend)
    return PipelineConfig(variant=variant, backend=backend)


def evaluate_cell(
    task: TaskSpec,
    params: Params,
    policy_config: PolicyConfig,
    pipeline_config: PipelineConfig,
    shift: ShiftSpec,
    trials: int,
    base_seed: int,
    condition: str = "unshifted",
    world_config: WorldConfig = WorldConfig(),
    max_steps: int = 90,
) -> CellResult:
    """Roll `trials` seeded episodes and aggregate exact statistics.

    Trial i uses seed base_seed + i regardless of variant or condition, so
    every cell of a matrix sees the same underlying scenes.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    successes = 0
    finals: list[float] = []
    ids: list[str] = []
    for trial in range(trials):
        seed = base_seed + trial
        result = rollout(
            params,
            policy_config,
            task,
            seed,
            pipeline_config,
            shift=shift,
            world_config=world_config,
            max_steps=max_steps,
        )
        if result.success:
            successes += 1
        finals.append(reward_curve(result.episode, task, world_config)[-1])
        ids.append(f"{task.name}-{condition}-{pipeline_config.variant}-s{seed}")
    mean = math.fsum(finals) / trials
    var = math.fsum((r - mean) ** 2 for r in finals) / trials
    return CellResult(
        success_rate=Fraction(successes, trials),
        reward_mean=mean,
        reward_std=math.sqrt(var),
        trials=trials,
        episode_ids=tuple(ids),
    )


@dataclass(frozen=True)
class MatrixSpec:
    """Everything needed to fill a task x variant x condition results matrix."""

    task_name: str
    variants: dict[str, tuple[Params, PolicyConfig] | None]  # None: model missing
    conditions: dict[str, ShiftSpec]
    trials: int = 50
    base_seed: int = 1000
    backend: BackendConfig = field(default_factory=BackendConfig)
    max_steps: int = 90

    def __post_init__(self) -> None:
        if self.task_name not in TASKS:
            raise ValidationError(f"unknown task {self.task_name!r}")
        for v in self.variants:
            if v not in VARIANT_ORDER:
                raise ValidationError(f"unknown variant {v!r}")
        if not self.conditions:
            raise ValidationError("matrix needs at least one condition")


def run_matrix(
    spec: MatrixSpec,
    out_dir: str | Path | None = None,
    world_config: WorldConfig = WorldConfig(),
) -> dict:
    """Evaluate every (variant, condition) cell; optionally write all reports."""
    task = TASKS[spec.task_name]
    results: dict = {spec.task_name: {}}
    for variant in sorted(spec.variants):
        bundle = spec.variants[variant]
        per_condition: dict = {}
        for condition in sorted(spec.conditions):
            if bundle is None:
                per_condition[condition] = {"status": "missing_model"}
                continue
            params, policy_config = bundle
            cell = evaluate_cell(
                task,
                params,
                policy_config,
                pipeline_for_variant(variant, spec.backend),
                spec.conditions[condition],
                spec.trials,
                spec.base_seed,
                condition=condition,
                world_config=world_config,
                max_steps=spec.max_steps,
            )
            per_condition[condition] = cell.to_json()
        results[spec.task_name][variant] = per_condition

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.json").write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")
        (out / "results.csv").write_text(results_csv(results))
        (out / "results.md").write_text(results_markdown(results))
        (out / "results.svg").write_text(results_svg(results))
    return results


def _iter_cells(results: dict):
    for task_name in sorted(results):
        for variant in sorted(results[task_name]):
            for condition in sorted(results[task_name][variant]):
                yield task_name, variant, condition, results[task_name][variant][condition]


def results_csv(results: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["task", "variant", "condition", "status", "success_rate", "reward_mean", "reward_std", "trials"]
    )
    for task_name, variant, condition, cell in _iter_cells(results):
        if "status" in cell:
            writer.writerow([task_name, variant, condition, cell["status"], "", "", "", ""])
        else:
            writer.writerow(
                [
                    task_name,
                    variant,
                    condition,
                    "ok",
                    f"{cell['success_rate']:.4f}",
                    f"{cell['reward_mean']:.4f}",
                    f"{cell['reward_std']:.4f}",
                    cell["trials"],
                ]
            )
    return buf.getvalue()


def results_markdown(results: dict) -> str:
    lines = []
    for task_name in sorted(results):
        lines.append(f"## {task_name}")
        lines.append("")
        lines.append("| variant | condition | success rate | reward (mean ± std) | trials |")
        lines.append("| --- | --- | --- | --- | --- |")
        for _, variant, condition, cell in _iter_cells({task_name: results[task_name]}):
            if "status" in cell:
                lines.append(f"| {variant} | {condition} | {cell['status']} | — | — |")
            else:
                lines.append(
                    f"| {variant} | {condition} | {cell['success_rate']:.2f} | "
                    f"{cell['reward_mean']:.3f} ± {cell['reward_std']:.3f} | {cell['trials']} |"
                )
        lines.append("")
    return "\n".join(lines)


_SVG_COLORS = {"vanilla": "#9aa0a6", "masked": "#e8a13c", "arro": "#3a77c2"}


def results_svg(results: dict) -> str:
    """Grouped success-rate bar chart; pure string assembly, byte-deterministic."""
    cells = [c for c in _iter_cells(results) if "status" not in c[3]]
    width, height = 720, 320
    left, bottom, top = 60, 40, 20
    plot_w, plot_h = width - left - 20, height - bottom - top
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = top + plot_h * (1.0 - frac)
        parts.append(
            f'<line x1="{left}" y1="{y:.1f}" x2="{left + plot_w}" y2="{y:.1f}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{frac:.2f}</text>'
        )
    if cells:
        n = len(cells)
        slot = plot_w / n
        bar_w = slot * 0.7
        for i, (task_name, variant, condition, cell) in enumerate(cells):
            rate = cell["success_rate"]
            x = left + i * slot + (slot - bar_w) / 2
            bar_h = plot_h * rate
            y = top + plot_h - bar_h
            color = _SVG_COLORS.get(variant, "#555555")
            parts.append(
                f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w:.1f}" height="{bar_h:.1f}" '
                f'fill="{color}"/>'
            )
            label = f"{variant}/{condition}"
            cx = x + bar_w / 2
            parts.append(
                f'<text x="{cx:.1f}" y="{height - bottom + 14}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="9">{label}</text>'
            )
            parts.append(
                f'<text x="{cx:.1f}" y="{y - 4:.1f}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="10">{rate:.2f}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
