"""Core value types shared by the masking pipeline, simulator, and policy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

VARIANTS = ("vanilla", "masked", "arro")

GRIP_OPEN = 0
GRIP_CLOSED = 1

REMOTE_ENDPOINT_ENV = "ARRO_REMOTE_ENDPOINT"


class ScenemaskError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ScenemaskError, ValueError):
    """A value violates one of the documented type invariants."""


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr and arr.flags.writeable:
        out = arr.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Frame:
    """An RGB raster, height x width x 3, uint8."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.dtype != np.uint8:
            raise ValidationError("Frame.pixels must be a uint8 ndarray")
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValidationError(f"Frame.pixels must have shape (H, W, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValidationError("Frame must be at least 1x1")
        object.__setattr__(self, "pixels", _as_readonly(px))

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @classmethod
    def full(cls, width: int, height: int, color: tuple[int, int, int]) -> "Frame":
        """A uniformly colored frame."""
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:] = np.asarray(color, dtype=np.uint8)
        return cls(px)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self) -> int:
        return hash((self.pixels.shape, self.pixels.tobytes()))


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """A height x width uint8 raster whose entries are 0 or 1."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.dtype != np.uint8:
            raise ValidationError("BinaryMask.pixels must be a uint8 ndarray")
        if px.ndim != 2:
            raise ValidationError(f"BinaryMask.pixels must have shape (H, W), got {px.shape}")
        if px.size and int(px.max(initial=0)) > 1:
            raise ValidationError("BinaryMask entries must be 0 or 1")
        object.__setattr__(self, "pixels", _as_readonly(px))

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def area(self) -> int:
        return int(self.pixels.sum())

    def is_empty(self) -> bool:
        return self.area == 0

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=np.uint8))

    @classmethod
    def from_bool(cls, arr: np.ndarray) -> "BinaryMask":
        return cls(arr.astype(np.uint8))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self) -> int:
        return hash((self.pixels.shape, self.pixels.tobytes()))


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box, inclusive-exclusive: x in [x0, x1), y in [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self) -> None:
        for name in ("x0", "y0", "x1", "y1"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)):
                raise ValidationError(f"BoundingBox.{name} must be an int, got {type(v).__name__}")
            object.__setattr__(self, name, int(v))
        if self.x0 < 0 or self.y0 < 0:
            raise ValidationError("BoundingBox origin must be non-negative")
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValidationError(
                f"BoundingBox must satisfy x0 < x1 and y0 < y1, got ({self.x0},{self.y0},{self.x1},{self.y1})"
            )

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def check_within(self, width: int, height: int) -> None:
        """Raise unless the box lies inside a width x height raster."""
        if self.x1 > width or self.y1 > height:
            raise ValidationError(
                f"BoundingBox ({self.x0},{self.y0},{self.x1},{self.y1}) exceeds {width}x{height} frame"
            )

    def to_mask(self, width: int, height: int) -> BinaryMask:
        self.check_within(width, height)
        px = np.zeros((height, width), dtype=np.uint8)
        px[self.y0 : self.y1, self.x0 : self.x1] = 1
        return BinaryMask(px)


@dataclass(frozen=True)
class Keypoint:
    """A labeled pixel coordinate used to seed a mask track."""

    x: int
    y: int
    label: str

    def __post_init__(self) -> None:
        if self.x < 0 or self.y < 0:
            raise ValidationError("Keypoint coordinates must be non-negative")
        if not self.label:
            raise ValidationError("Keypoint.label must be non-empty")


@dataclass(frozen=True)
class EntitySummary:
    """Identity, class tags, and pixel centroid of one scene entity."""

    entity_id: str
    shape: str
    color: str
    centroid: tuple[float, float]

    def __post_init__(self) -> None:
        if not self.entity_id:
            raise ValidationError("EntitySummary.entity_id must be non-empty")
        cx, cy = self.centroid
        if not (math.isfinite(cx) and math.isfinite(cy)):
            raise ValidationError("EntitySummary.centroid must be finite")
        object.__setattr__(self, "centroid", (float(cx), float(cy)))


@dataclass(frozen=True)
class PromptSet:
    """Language inputs for one episode: box-route object prompts + the task prompt."""

    object_prompts: tuple[str, ...]
    task_prompt: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "object_prompts", tuple(self.object_prompts))
        for p in self.object_prompts:
            if not p or not p.strip():
                raise ValidationError("object prompts must be non-empty strings")
        if not self.task_prompt or not self.task_prompt.strip():
            raise ValidationError("task_prompt must be non-empty")


@dataclass(frozen=True)
class ActionVector:
    """Absolute gripper target in world units plus a binary grip flag."""

    x: float
    y: float
    grip: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValidationError("ActionVector position must be finite")
        if self.grip not in (GRIP_OPEN, GRIP_CLOSED):
            raise ValidationError(f"ActionVector.grip must be 0 or 1, got {self.grip!r}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "grip", int(self.grip))


@dataclass(frozen=True)
class EpisodeStep:
    """One timestep: rendered frame, commanded action, and simulator ground truth."""

    frame: Frame
    action: ActionVector
    gt_masks: dict[str, BinaryMask] = field(default_factory=dict)
    gt_entities: tuple[EntitySummary, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "gt_masks", dict(self.gt_masks))
        object.__setattr__(self, "gt_entities", tuple(self.gt_entities))
        for entity_id, mask in self.gt_masks.items():
            if (mask.height, mask.width) != (self.frame.height, self.frame.width):
                raise ValidationError(
                    f"gt mask {entity_id!r} is {mask.width}x{mask.height}, frame is "
                    f"{self.frame.width}x{self.frame.height}"
                )


@dataclass(frozen=True)
class Episode:
    """A recorded trajectory: frames, actions, prompts, and optional ground truth."""

    task_id: str
    prompt_set: PromptSet
    steps: tuple[EpisodeStep, ...]
    background_id: str
    success: bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.task_id:
            raise ValidationError("Episode.task_id must be non-empty")
        if not self.steps:
            raise ValidationError("Episode must contain at least one step")
        w, h = self.steps[0].frame.width, self.steps[0].frame.height
        for i, step in enumerate(self.steps):
            if (step.frame.width, step.frame.height) != (w, h):
                raise ValidationError(f"step {i} frame size differs from step 0")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def width(self) -> int:
        return self.steps[0].frame.width

    @property
    def height(self) -> int:
        return self.steps[0].frame.height

    @property
    def actions(self) -> tuple[ActionVector, ...]:
        return tuple(s.action for s in self.steps)


@dataclass(frozen=True)
class HorizonConfig:
    """Observation and action chunk lengths for the policy."""

    obs_horizon: int = 2
    action_horizon: int = 6

    def __post_init__(self) -> None:
        if self.obs_horizon < 1:
            raise ValidationError("obs_horizon must be >= 1")
        if self.action_horizon < 1:
            raise ValidationError("action_horizon must be >= 1")
