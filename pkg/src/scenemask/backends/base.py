"""Shared backend contracts: detection, proposal, selection, and mask sessions.

A backend grounds language in pixels (detect/select), proposes candidate
regions, and opens a mask session that propagates per-track masks through a
frame sequence. The oracle backend additionally reads simulator ground truth
from the per-step context; pixel-only backends ignore the context.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

from ..core import BinaryMask, BoundingBox, EntitySummary, Frame, Keypoint, ScenemaskError
from ..regions import RegionAnnotation


class BackendError(ScenemaskError):
    """A backend call failed (transport, protocol, or response validation)."""


class SessionInitError(BackendError):
    """A mask session could not be initialized from the first frame."""


@dataclass(frozen=True)
class StepContext:
    """Simulator ground truth for the current frame, when available."""

    gt_masks: dict[str, BinaryMask] | None = None
    gt_entities: tuple[EntitySummary, ...] | None = None


@runtime_checkable
class MaskSession(Protocol):
    """Stateful per-episode mask propagation."""

    @property
    def track_ids(self) -> tuple[str, ...]: ...

    @property
    def frame_index(self) -> int:
        """Number of frames consumed so far (1 after init)."""
        ...

    @property
    def init_masks(self) -> dict[str, BinaryMask]:
        """Masks for the initialization frame."""
        ...

    def propagate(self, frame: Frame, ctx: StepContext | None = None) -> dict[str, BinaryMask]:
        """Advance one frame; returns one mask per track (empty when unseen)."""
        ...


@runtime_checkable
class PerceptionBackend(Protocol):
    """Grounding + segmentation entry points used by the masking pipeline."""

    name: str

    def detect(self, frame: Frame, prompt: str, ctx: StepContext | None = None) -> BoundingBox | None: ...

    def propose(self, frame: Frame, ctx: StepContext | None = None) -> list[RegionAnnotation]: ...

    def select(
        self,
        frame: Frame,
        annotations: list[RegionAnnotation],
        task_prompt: str,
        ctx: StepContext | None = None,
    ) -> list[int]:
        """Region ids for the task-relevant regions, gripper fingers first
        (left then right by centroid x), then one id per prompted object."""
        ...

    def init_session(
        self,
        frame: Frame,
        boxes: list[tuple[str, BoundingBox]],
        keypoints: list[Keypoint],
        ctx: StepContext | None = None,
    ) -> MaskSession: ...
