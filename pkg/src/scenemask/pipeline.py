"""Scene recomposition pipeline: ground, track, and recompose every frame.

Initialization on the first frame: each object prompt is detected to a box;
unprompted region proposals are annotated and the task prompt selects the
gripper fingers (one track per finger) and any described object; selected
region centroids become labeled keypoints; boxes + keypoints open a mask
session. Every later frame: propagate the session, union the track masks, and
composite the original pixels over the virtual background.

Variants: vanilla passes frames through untouched; masked composites onto
black; arro composites onto the structured grid. The same code path serves
batch episode transformation and live per-frame use, so the two are
byte-identical on identical inputs.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .backends.base import BackendError, MaskSession, PerceptionBackend, SessionInitError, StepContext
from .backends.color import TAU_COLOR_DEFAULT, TAU_IOU_DEFAULT, ColorBackend
from .backends.oracle import OracleBackend
from .backends.remote import RemoteBackend
from .compositor import BackgroundSpec, compose_frame, make_background, union_masks
from .core import (
    BinaryMask,
    Episode,
    EpisodeStep,
    Frame,
    Keypoint,
    PromptSet,
    ValidationError,
)
from .episode_io import list_episode_dirs, load_episode, save_episode
from .prompt import parse_task_prompt
from .regions import region_anchor_point

BACKEND_KINDS = ("oracle", "color", "remote")

GRIPPER_TRACK_LABELS = ("gripper_left", "gripper_right")


@dataclass(frozen=True)
class BackendConfig:
    """Which perception backend to use and its knobs."""

    kind: str = "oracle"
    endpoint: str | None = None
    timeout: float = 10.0
    tau_iou: float = TAU_IOU_DEFAULT
    tau_color: float = TAU_COLOR_DEFAULT
    gripper_color: str = "green"

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ValidationError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if not (0.0 < self.tau_iou <= 1.0):
            raise ValidationError("tau_iou must be in (0, 1]")
        if self.tau_color < 0:
            raise ValidationError("tau_color must be non-negative")


@dataclass(frozen=True)
class PipelineConfig:
    """Variant plus background plus backend; variants pin the background kind."""

    variant: str = "arro"
    background: BackgroundSpec | None = None
    backend: BackendConfig = field(default_factory=BackendConfig)

    def __post_init__(self) -> None:
        if self.variant not in ("vanilla", "masked", "arro"):
            raise ValidationError(f"variant must be vanilla, masked, or arro, got {self.variant!r}")
        if self.variant == "vanilla":
            if self.background is not None:
                raise ValidationError("vanilla uses no virtual background")
            return
        bg = self.background if self.background is not None else (
            BackgroundSpec(kind="black") if self.variant == "masked" else BackgroundSpec(kind="grid")
        )
        if self.variant == "masked" and bg.kind != "black":
            raise ValidationError("masked variant requires a black background")
        if self.variant == "arro" and bg.kind != "grid":
            raise ValidationError("arro variant requires a grid background")
        object.__setattr__(self, "background", bg)

    def background_id(self) -> str:
        assert self.background is not None
        return f"{self.variant}:{self.background.key()}"


def make_backend(config: BackendConfig) -> PerceptionBackend:
    if config.kind == "oracle":
        return OracleBackend()
    if config.kind == "color":
        return ColorBackend(
            tau_iou=config.tau_iou,
            tau_color=config.tau_color,
            gripper_color=config.gripper_color,
        )
    return RemoteBackend(endpoint=config.endpoint, timeout=config.timeout)


def slug(prompt: str) -> str:
    s = re.sub(r"[^a-z0-9]+", "_", prompt.lower()).strip("_")
    return s or "object"


def init_tracks(
    backend: PerceptionBackend,
    frame: Frame,
    prompt_set: PromptSet,
    ctx: StepContext | None = None,
) -> MaskSession:
    """Ground the prompts on the first frame and open a mask session.

    Fail-fast: any unresolved object prompt, missing finger pair, or
    unresolvable task prompt raises SessionInitError; no partial session.
    """
    missing: list[str] = []
    box_list = []
    for prompt in prompt_set.object_prompts:
        box = backend.detect(frame, prompt, ctx)
        if box is None:
            missing.append(prompt)
        else:
            box_list.append((slug(prompt), box))
    if missing:
        raise SessionInitError(f"object prompts not found: {missing}")

    wants_fingers, object_query = parse_task_prompt(prompt_set.task_prompt)
    annotations = backend.propose(frame, ctx)
    selected = backend.select(frame, annotations, prompt_set.task_prompt, ctx)

    expected = (2 if wants_fingers else 0) + (1 if object_query is not None else 0)
    if len(selected) != expected:
        raise SessionInitError(
            f"selector returned {len(selected)} region ids, task prompt implies {expected}"
        )
    by_id = {a.region_id: a for a in annotations}
    unknown = [i for i in selected if i not in by_id]
    if unknown:
        raise SessionInitError(f"selector returned unknown region ids {unknown}")

    keypoints: list[Keypoint] = []
    remaining = list(selected)
    if wants_fingers:
        finger_ids = remaining[:2]
        remaining = remaining[2:]
        fingers = sorted((by_id[i] for i in finger_ids), key=lambda a: (a.centroid[0], a.region_id))
        for label, region in zip(GRIPPER_TRACK_LABELS, fingers):
            x, y = region_anchor_point(region)
            keypoints.append(Keypoint(x=x, y=y, label=label))
    for k, region_id in enumerate(remaining):
        x, y = region_anchor_point(by_id[region_id])
        keypoints.append(Keypoint(x=x, y=y, label=f"object_{k}"))

    return backend.init_session(frame, box_list, keypoints, ctx)


def mask_frame(
    session: MaskSession,
    frame: Frame,
    background: Frame,
    ctx: StepContext | None = None,
) -> tuple[Frame, BinaryMask]:
    """Propagate one frame and composite it onto the virtual background."""
    masks = session.propagate(frame, ctx)
    union = union_masks(list(masks.values()), width=frame.width, height=frame.height)
    return compose_frame(frame, union, background), union


class FrameTransformer:
    """Stateful per-episode view transformer; identical math to batch transform."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self._backend: PerceptionBackend | None = None
        if config.variant != "vanilla":
            self._backend = make_backend(config.backend)
        self._session: MaskSession | None = None
        self._background: Frame | None = None

    @property
    def session(self) -> MaskSession | None:
        return self._session

    def reset(self, frame: Frame, prompt_set: PromptSet, ctx: StepContext | None = None) -> Frame:
        """Initialize on an episode's first frame; returns the transformed frame."""
        if self.config.variant == "vanilla":
            return frame
        assert self._backend is not None and self.config.background is not None
        self._background = make_background(self.config.background, frame.width, frame.height)
        self._session = init_tracks(self._backend, frame, prompt_set, ctx)
        union = union_masks(
            list(self._session.init_masks.values()), width=frame.width, height=frame.height
        )
        return compose_frame(frame, union, self._background)

    def step(self, frame: Frame, ctx: StepContext | None = None) -> Frame:
        """Transform one subsequent frame."""
        if self.config.variant == "vanilla":
            return frame
        if self._session is None or self._background is None:
            raise ValidationError("FrameTransformer.step called before reset")
        out, _ = mask_frame(self._session, frame, self._background, ctx)
        return out


def transform_episode(episode: Episode, config: PipelineConfig) -> Episode:
    """Recompose every frame of an episode; actions and metadata are unchanged.

    Raises SessionInitError / BackendError on failure; the caller decides how
    to record failed episodes (transform_dataset writes them to its manifest).
    """
    if config.variant == "vanilla":
        return episode
    transformer = FrameTransformer(config)
    new_steps = []
    for t, step in enumerate(episode.steps):
        ctx = StepContext(gt_masks=step.gt_masks or None, gt_entities=step.gt_entities or None)
        if t == 0:
            frame = transformer.reset(step.frame, episode.prompt_set, ctx)
        else:
            frame = transformer.step(step.frame, ctx)
        new_steps.append(replace(step, frame=frame))
    return Episode(
        task_id=episode.task_id,
        prompt_set=episode.prompt_set,
        steps=tuple(new_steps),
        background_id=config.background_id(),
        success=episode.success,
    )


def _transform_one_dir(args: tuple[str, str, PipelineConfig]) -> tuple[str, str, str | None]:
    src, dst, config = args
    try:
        episode = load_episode(src)
        out = transform_episode(episode, config)
        save_episode(dst, out, overwrite=True)
        return (Path(src).name, "ok", None)
    except (BackendError, ValidationError) as exc:
        return (Path(src).name, "failed", str(exc))


def transform_dataset(
    in_dir: str | Path,
    out_dir: str | Path,
    config: PipelineConfig,
    *,
    workers: int = 1,
) -> dict[str, dict]:
    """Transform every episode directory; returns and writes a manifest.

    Failed episodes (for example when the remote endpoint is down) are
    recorded as {"status": "failed", "reason": ...} and skipped; the rest are
    written to out_dir under their original names. Output is independent of
    worker scheduling because episodes are independent and named by input.
    """
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    sources = list_episode_dirs(in_dir)
    jobs = [(str(src), str(out_root / src.name), config) for src in sources]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_transform_one_dir, jobs))
    else:
        results = [_transform_one_dir(job) for job in jobs]
    manifest = {
        name: {"status": status, **({"reason": reason} if reason else {})}
        for name, status, reason in sorted(results)
    }
    (out_root / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return manifest
