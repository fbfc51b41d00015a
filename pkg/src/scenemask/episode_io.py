"""Episode directory serialization.

Layout (one directory per episode):
    frame_000000.png ...        RGB frames, no alpha
    metadata.json               task id, prompts, actions, background id,
                                per-step entity summaries, success flag
    masks/<entity-id>/frame_000000.png ...
                                1-bit masks, white (255) = inside

save -> load is a bit-exact round trip for every field, including masks.
"""

from __future__ import annotations

import io
import json
import os
import re
from pathlib import Path

import numpy as np
from PIL import Image

from .core import (
    ActionVector,
    BinaryMask,
    EntitySummary,
    Episode,
    EpisodeStep,
    Frame,
    PromptSet,
    ScenemaskError,
)

METADATA_KEYS = {"task_id", "prompts", "actions", "background_id", "entities", "success"}

_ENTITY_ID_RE = re.compile(r"^[A-Za-z0-9_\-]+$")


class EpisodeFormatError(ScenemaskError):
    """An episode directory violates the documented layout."""


def _frame_name(index: int) -> str:
    return f"frame_{index:06d}.png"


def encode_frame_png(frame: Frame) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(frame.pixels), "RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_frame_png(data: bytes) -> Frame:
    img = Image.open(io.BytesIO(data))
    if img.mode != "RGB":
        raise EpisodeFormatError(f"frame PNG must be RGB, got mode {img.mode!r}")
    return Frame(np.asarray(img, dtype=np.uint8))


def encode_mask_png(mask: BinaryMask) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(mask.pixels, dtype=bool)).save(buf, format="PNG")
    return buf.getvalue()


def decode_mask_png(data: bytes) -> BinaryMask:
    img = Image.open(io.BytesIO(data))
    if img.mode != "1":
        raise EpisodeFormatError(f"mask PNG must be 1-bit, got mode {img.mode!r}")
    return BinaryMask(np.asarray(img, dtype=bool).astype(np.uint8))


def _entity_to_json(e: EntitySummary) -> dict:
    return {
        "id": e.entity_id,
        "shape": e.shape,
        "color": e.color,
        "centroid": [e.centroid[0], e.centroid[1]],
    }


def _entity_from_json(obj: dict) -> EntitySummary:
    if set(obj) != {"id", "shape", "color", "centroid"}:
        raise EpisodeFormatError(f"bad entity record keys: {sorted(obj)}")
    cx, cy = obj["centroid"]
    return EntitySummary(entity_id=obj["id"], shape=obj["shape"], color=obj["color"], centroid=(cx, cy))


def save_episode(directory: str | os.PathLike, episode: Episode, *, overwrite: bool = False) -> Path:
    """Write an episode directory; refuses to clobber unless overwrite is set."""
    root = Path(directory)
    meta_path = root / "metadata.json"
    if meta_path.exists() and not overwrite:
        raise EpisodeFormatError(f"{meta_path} already exists (pass overwrite=True to replace)")
    root.mkdir(parents=True, exist_ok=True)

    for step in episode.steps:
        for entity_id in step.gt_masks:
            if not _ENTITY_ID_RE.match(entity_id):
                raise EpisodeFormatError(f"entity id {entity_id!r} is not directory-safe")

    meta = {
        "task_id": episode.task_id,
        "prompts": {
            "objects": list(episode.prompt_set.object_prompts),
            "task": episode.prompt_set.task_prompt,
        },
        "actions": [[s.action.x, s.action.y, s.action.grip] for s in episode.steps],
        "background_id": episode.background_id,
        "entities": [[_entity_to_json(e) for e in s.gt_entities] for s in episode.steps],
        "success": episode.success,
    }
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    for i, step in enumerate(episode.steps):
        (root / _frame_name(i)).write_bytes(encode_frame_png(step.frame))
        for entity_id, mask in step.gt_masks.items():
            mask_dir = root / "masks" / entity_id
            mask_dir.mkdir(parents=True, exist_ok=True)
            (mask_dir / _frame_name(i)).write_bytes(encode_mask_png(mask))
    return root


def load_episode(directory: str | os.PathLike) -> Episode:
    """Read an episode directory written by save_episode."""
    root = Path(directory)
    meta_path = root / "metadata.json"
    if not meta_path.exists():
        raise EpisodeFormatError(f"{meta_path} not found")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise EpisodeFormatError(f"metadata.json is not valid JSON: {exc}") from exc
    if not isinstance(meta, dict) or set(meta) != METADATA_KEYS:
        raise EpisodeFormatError(
            f"metadata.json keys must be exactly {sorted(METADATA_KEYS)}, got "
            f"{sorted(meta) if isinstance(meta, dict) else type(meta).__name__}"
        )
    prompts = meta["prompts"]
    if not isinstance(prompts, dict) or set(prompts) != {"objects", "task"}:
        raise EpisodeFormatError("metadata prompts must have keys {objects, task}")

    actions = meta["actions"]
    entities = meta["entities"]
    n = len(actions)
    if n == 0:
        raise EpisodeFormatError("episode must contain at least one step")
    if len(entities) != n:
        raise EpisodeFormatError(f"entities has {len(entities)} steps, actions has {n}")

    frames = []
    for i in range(n):
        path = root / _frame_name(i)
        if not path.exists():
            raise EpisodeFormatError(f"missing {path.name}")
        frames.append(decode_frame_png(path.read_bytes()))
    if (root / _frame_name(n)).exists():
        raise EpisodeFormatError(f"found {_frame_name(n)} beyond the {n} actions in metadata")

    masks_root = root / "masks"
    per_step_masks: list[dict[str, BinaryMask]] = [dict() for _ in range(n)]
    if masks_root.is_dir():
        for entity_dir in sorted(p for p in masks_root.iterdir() if p.is_dir()):
            entity_id = entity_dir.name
            for i in range(n):
                mpath = entity_dir / _frame_name(i)
                if mpath.exists():
                    per_step_masks[i][entity_id] = decode_mask_png(mpath.read_bytes())

    steps = []
    for i in range(n):
        ax, ay, grip = actions[i]
        steps.append(
            EpisodeStep(
                frame=frames[i],
                action=ActionVector(x=ax, y=ay, grip=int(grip)),
                gt_masks=per_step_masks[i],
                gt_entities=tuple(_entity_from_json(e) for e in entities[i]),
            )
        )
    return Episode(
        task_id=meta["task_id"],
        prompt_set=PromptSet(
            object_prompts=tuple(prompts["objects"]),
            task_prompt=prompts["task"],
        ),
        steps=tuple(steps),
        background_id=meta["background_id"],
        success=bool(meta["success"]),
    )


def list_episode_dirs(dataset_dir: str | os.PathLike) -> list[Path]:
    """Episode subdirectories of a dataset directory, sorted by name."""
    root = Path(dataset_dir)
    if not root.is_dir():
        raise EpisodeFormatError(f"{root} is not a directory")
    return sorted(p for p in root.iterdir() if p.is_dir() and (p / "metadata.json").exists())
