"""Pixel-only backend: palette-color region proposal plus greedy IoU tracking.

Matching runs in two passes per frame. Continuity first: over all
(track, region) pairs whose IoU with the track's last matched mask is at
least tau_iou, assign greedily best-IoU-first (ties: nearest centroid, lowest
region id, lowest track id), each region claimed at most once. Then recovery:
tracks still unmatched and unseen for at least one frame take the unclaimed
region whose mean color lies within tau_color (Euclidean RGB) of the track's
color statistics, nearest color first — so a reappearing object re-binds
without ever stealing a region another track holds by continuity. Unmatched
tracks emit an empty mask and count frames since last seen; a match resets
the counter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..colors import COLOR_NAMES, color_distance, nearest_color_name
from ..core import BinaryMask, BoundingBox, Frame, Keypoint, ValidationError
from ..prompt import parse_task_prompt, resolve
from ..regions import (
    RegionAnnotation,
    annotation_summaries,
    mask_centroid,
    mask_iou,
    mask_tight_box,
    mean_color,
    point_in_region,
    propose_regions,
)
from .base import SessionInitError, StepContext

TAU_IOU_DEFAULT = 0.3
TAU_COLOR_DEFAULT = 30.0


@dataclass
class TrackState:
    """Per-track memory: last matched mask, centroid, color stats, staleness."""

    track_id: str
    last_mask: BinaryMask
    last_centroid: tuple[float, float]
    color: tuple[float, float, float]
    frames_since_seen: int = 0


@dataclass
class ColorTrackSession:
    """Tracking state over one episode for the color backend."""

    width: int
    height: int
    tau_iou: float
    tau_color: float
    tracks: dict[str, TrackState]
    init_masks: dict[str, BinaryMask]
    frame_index: int = 1

    @property
    def track_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.tracks))

    def propagate(self, frame: Frame, ctx: StepContext | None = None) -> dict[str, BinaryMask]:
        if (frame.height, frame.width) != (self.height, self.width):
            raise ValidationError(
                f"frame is {frame.width}x{frame.height}, session expects {self.width}x{self.height}"
            )
        regions = propose_regions(frame)
        claimed: set[int] = set()
        matched: dict[str, RegionAnnotation] = {}

        pairs: list[tuple[float, float, int, str, RegionAnnotation]] = []
        for track_id in sorted(self.tracks):
            tr = self.tracks[track_id]
            for region in regions:
                iou = mask_iou(tr.last_mask, region.mask)
                if iou >= self.tau_iou:
                    dist = math.dist(tr.last_centroid, region.centroid)
                    pairs.append((-iou, dist, region.region_id, track_id, region))
        for _, _, region_id, track_id, region in sorted(pairs, key=lambda p: p[:4]):
            if track_id in matched or region_id in claimed:
                continue
            matched[track_id] = region
            claimed.add(region_id)

        for track_id in sorted(self.tracks):
            tr = self.tracks[track_id]
            if track_id in matched or tr.frames_since_seen == 0:
                continue
            best: RegionAnnotation | None = None
            best_key: tuple[float, float, int] | None = None
            for region in regions:
                if region.region_id in claimed:
                    continue
                cd = color_distance(tr.color, region.mean_color)
                if cd > self.tau_color:
                    continue
                key = (cd, math.dist(tr.last_centroid, region.centroid), region.region_id)
                if best_key is None or key < best_key:
                    best, best_key = region, key
            if best is not None:
                matched[track_id] = best
                claimed.add(best.region_id)

        out: dict[str, BinaryMask] = {}
        for track_id in sorted(self.tracks):
            tr = self.tracks[track_id]
            region = matched.get(track_id)
            if region is None:
                out[track_id] = BinaryMask.zeros(self.width, self.height)
                tr.frames_since_seen += 1
            else:
                out[track_id] = region.mask
                tr.last_mask = region.mask
                tr.last_centroid = region.centroid
                tr.color = region.mean_color
                tr.frames_since_seen = 0
        self.frame_index += 1
        return out


class ColorBackend:
    """Deterministic color-based grounding and tracking."""

    name = "color"

    def __init__(
        self,
        tau_iou: float = TAU_IOU_DEFAULT,
        tau_color: float = TAU_COLOR_DEFAULT,
        gripper_color: str = "green",
    ):
        if gripper_color not in COLOR_NAMES:
            raise ValidationError(f"gripper_color must be one of {COLOR_NAMES}")
        self.tau_iou = float(tau_iou)
        self.tau_color = float(tau_color)
        self.gripper_color = gripper_color

    def detect(self, frame: Frame, prompt: str, ctx: StepContext | None = None) -> BoundingBox | None:
        """Tight box of the largest region matching the prompt's color word."""
        color = next((w for w in prompt.lower().split() if w in COLOR_NAMES), None)
        if color is None:
            return None
        matches = [
            r for r in propose_regions(frame) if nearest_color_name(r.mean_color) == color
        ]
        if not matches:
            return None
        best = min(matches, key=lambda r: (-r.mask.area, r.region_id))
        return mask_tight_box(best.mask)

    def propose(self, frame: Frame, ctx: StepContext | None = None) -> list[RegionAnnotation]:
        return propose_regions(frame)

    def select(
        self,
        frame: Frame,
        annotations: list[RegionAnnotation],
        task_prompt: str,
        ctx: StepContext | None = None,
    ) -> list[int]:
        wants_fingers, query = parse_task_prompt(task_prompt)
        chosen: list[int] = []
        finger_ids: set[int] = set()
        if wants_fingers:
            fingers = [
                a for a in annotations if nearest_color_name(a.mean_color) == self.gripper_color
            ]
            if len(fingers) != 2:
                raise SessionInitError(
                    f"expected exactly 2 {self.gripper_color} finger regions, found {len(fingers)}"
                )
            fingers.sort(key=lambda a: (a.centroid[0], a.region_id))
            chosen.extend(a.region_id for a in fingers)
            finger_ids = set(chosen)
        if query is not None:
            summaries = [
                s
                for a, s in zip(annotations, annotation_summaries(annotations))
                if a.region_id not in finger_ids
            ]
            picked = resolve(query, summaries)
            chosen.append(int(picked.entity_id))
        return chosen

    def init_session(
        self,
        frame: Frame,
        boxes: list[tuple[str, BoundingBox]],
        keypoints: list[Keypoint],
        ctx: StepContext | None = None,
    ) -> ColorTrackSession:
        regions = propose_regions(frame)
        tracks: dict[str, TrackState] = {}
        masks: dict[str, BinaryMask] = {}

        def add(track_id: str, mask: BinaryMask) -> None:
            if track_id in tracks:
                raise SessionInitError(f"duplicate track id {track_id!r}")
            tracks[track_id] = TrackState(
                track_id=track_id,
                last_mask=mask,
                last_centroid=mask_centroid(mask),
                color=mean_color(frame, mask),
            )
            masks[track_id] = mask

        for track_id, box in boxes:
            box.check_within(frame.width, frame.height)
            box_px = box.to_mask(frame.width, frame.height).pixels
            best = None
            best_key = None
            for region in regions:
                overlap = int(np.bitwise_and(region.mask.pixels, box_px).sum())
                if overlap == 0:
                    continue
                key = (-overlap, region.region_id)
                if best_key is None or key < best_key:
                    best, best_key = region, key
            if best is None:
                raise SessionInitError(f"no proposed region overlaps the box for track {track_id!r}")
            clipped = BinaryMask(np.bitwise_and(best.mask.pixels, box_px))
            add(track_id, clipped)

        for kp in keypoints:
            region = point_in_region(regions, kp.x, kp.y)
            if region is None:
                raise SessionInitError(f"keypoint {kp.label!r} at ({kp.x},{kp.y}) falls in no region")
            add(kp.label, region.mask)

        if not tracks:
            raise SessionInitError("session needs at least one box or keypoint")
        return ColorTrackSession(
            width=frame.width,
            height=frame.height,
            tau_iou=self.tau_iou,
            tau_color=self.tau_color,
            tracks=tracks,
            init_masks=masks,
        )
