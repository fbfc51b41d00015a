"""Ground-truth backend: answers every query from simulator masks and entities.

Used to isolate pipeline and policy behavior from tracker quality. Every call
requires a StepContext carrying gt_masks (and gt_entities for language ops);
masks returned are exactly the simulator's visible footprints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import BinaryMask, BoundingBox, Frame, Keypoint
from ..prompt import parse_task_prompt, resolve
from ..regions import RegionAnnotation, mask_centroid, mask_tight_box, mean_color
from .base import BackendError, SessionInitError, StepContext

GRIPPER_LEFT = "gripper_left"
GRIPPER_RIGHT = "gripper_right"


def _require_ctx(ctx: StepContext | None, what: str) -> StepContext:
    if ctx is None or ctx.gt_masks is None:
        raise BackendError(f"oracle backend needs ground-truth context for {what}")
    return ctx


@dataclass
class OracleSession:
    """Emits the ground-truth mask of each bound entity every frame."""

    width: int
    height: int
    bindings: dict[str, str]  # track id -> ground-truth mask key
    init_masks: dict[str, BinaryMask]
    frame_index: int = 1

    @property
    def track_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.bindings))

    def propagate(self, frame: Frame, ctx: StepContext | None = None) -> dict[str, BinaryMask]:
        ctx = _require_ctx(ctx, "propagation")
        assert ctx.gt_masks is not None
        out: dict[str, BinaryMask] = {}
        for track_id in sorted(self.bindings):
            key = self.bindings[track_id]
            mask = ctx.gt_masks.get(key)
            if mask is None:
                raise BackendError(f"ground truth has no mask {key!r} for track {track_id!r}")
            out[track_id] = mask
        self.frame_index += 1
        return out


class OracleBackend:
    """Perfect perception drawn from the simulator's ground truth."""

    name = "oracle"

    def detect(self, frame: Frame, prompt: str, ctx: StepContext | None = None) -> BoundingBox | None:
        """Tight box of the first entity whose color and shape words appear in the prompt."""
        ctx = _require_ctx(ctx, "detect")
        assert ctx.gt_masks is not None and ctx.gt_entities is not None
        words = set(prompt.lower().split())
        matches = [e for e in ctx.gt_entities if e.color in words and e.shape in words]
        matches.sort(key=lambda e: (e.centroid[1], e.entity_id))
        for entity in matches:
            mask = ctx.gt_masks.get(entity.entity_id)
            if mask is not None and not mask.is_empty():
                return mask_tight_box(mask)
        return None

    def propose(self, frame: Frame, ctx: StepContext | None = None) -> list[RegionAnnotation]:
        """One region per non-empty ground-truth mask, ids in raster order."""
        ctx = _require_ctx(ctx, "propose")
        assert ctx.gt_masks is not None
        found = []
        for key in sorted(ctx.gt_masks):
            mask = ctx.gt_masks[key]
            if mask.is_empty():
                continue
            found.append((mask_centroid(mask), mask))
        found.sort(key=lambda item: (item[0][1], item[0][0]))
        return [
            RegionAnnotation(
                region_id=i,
                mask=mask,
                centroid=centroid,
                mean_color=mean_color(frame, mask),
            )
            for i, (centroid, mask) in enumerate(found, start=1)
        ]

    def _region_for_mask(
        self, annotations: list[RegionAnnotation], mask: BinaryMask, what: str
    ) -> int:
        for a in annotations:
            if np.array_equal(a.mask.pixels, mask.pixels):
                return a.region_id
        raise SessionInitError(f"no proposed region matches ground truth for {what}")

    def select(
        self,
        frame: Frame,
        annotations: list[RegionAnnotation],
        task_prompt: str,
        ctx: StepContext | None = None,
    ) -> list[int]:
        ctx = _require_ctx(ctx, "select")
        assert ctx.gt_masks is not None and ctx.gt_entities is not None
        wants_fingers, query = parse_task_prompt(task_prompt)
        chosen: list[int] = []
        if wants_fingers:
            for key in (GRIPPER_LEFT, GRIPPER_RIGHT):
                mask = ctx.gt_masks.get(key)
                if mask is None or mask.is_empty():
                    raise SessionInitError(f"gripper finger {key!r} is not visible in the first frame")
                chosen.append(self._region_for_mask(annotations, mask, key))
        if query is not None:
            entity = resolve(query, ctx.gt_entities)
            mask = ctx.gt_masks.get(entity.entity_id)
            if mask is None or mask.is_empty():
                raise SessionInitError(f"entity {entity.entity_id!r} is not visible in the first frame")
            chosen.append(self._region_for_mask(annotations, mask, entity.entity_id))
        return chosen

    def init_session(
        self,
        frame: Frame,
        boxes: list[tuple[str, BoundingBox]],
        keypoints: list[Keypoint],
        ctx: StepContext | None = None,
    ) -> OracleSession:
        ctx = _require_ctx(ctx, "session init")
        assert ctx.gt_masks is not None
        bindings: dict[str, str] = {}
        masks: dict[str, BinaryMask] = {}

        def add(track_id: str, key: str) -> None:
            if track_id in bindings:
                raise SessionInitError(f"duplicate track id {track_id!r}")
            bindings[track_id] = key
            masks[track_id] = ctx.gt_masks[key]  # type: ignore[index]

        for track_id, box in boxes:
            box.check_within(frame.width, frame.height)
            box_px = box.to_mask(frame.width, frame.height).pixels
            best_key = None
            best = None
            for key in sorted(ctx.gt_masks):
                mask = ctx.gt_masks[key]
                overlap = int(np.bitwise_and(mask.pixels, box_px).sum())
                if overlap == 0:
                    continue
                union = int(np.bitwise_or(mask.pixels, box_px).sum())
                score = (-overlap / union, key)
                if best is None or score < best:
                    best, best_key = score, key
            if best_key is None:
                raise SessionInitError(f"no ground-truth mask overlaps the box for track {track_id!r}")
            add(track_id, best_key)

        for kp in keypoints:
            hit = None
            for key in sorted(ctx.gt_masks):
                mask = ctx.gt_masks[key]
                if mask.pixels[kp.y, kp.x]:
                    hit = key
                    break
            if hit is None:
                raise SessionInitError(f"keypoint {kp.label!r} at ({kp.x},{kp.y}) falls in no ground-truth mask")
            add(kp.label, hit)

        if not bindings:
            raise SessionInitError("session needs at least one box or keypoint")
        return OracleSession(
            width=frame.width,
            height=frame.height,
            bindings=bindings,
            init_masks=masks,
        )
