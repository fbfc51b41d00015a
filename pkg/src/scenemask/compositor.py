"""Mask union algebra and foreground-over-background recomposition.

The recomposed view keeps original pixels wherever the union mask is set and
substitutes a virtual background everywhere else. All arithmetic is exact
8-bit selection; no blending.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import BinaryMask, Frame, ValidationError

BACKGROUND_KINDS = ("black", "grid")

GRID_SPACING_DEFAULT = 32
GRID_THICKNESS_DEFAULT = 2
GRID_BASE_DEFAULT = (40, 40, 40)
GRID_LINE_DEFAULT = (200, 200, 200)


@dataclass(frozen=True)
class BackgroundSpec:
    """A virtual background: uniform black, or a regular grid on a base color."""

    kind: str = "grid"
    spacing: int = GRID_SPACING_DEFAULT
    thickness: int = GRID_THICKNESS_DEFAULT
    base_color: tuple[int, int, int] = GRID_BASE_DEFAULT
    line_color: tuple[int, int, int] = GRID_LINE_DEFAULT

    def __post_init__(self) -> None:
        if self.kind not in BACKGROUND_KINDS:
            raise ValidationError(f"BackgroundSpec.kind must be one of {BACKGROUND_KINDS}, got {self.kind!r}")
        if self.spacing < 1:
            raise ValidationError("BackgroundSpec.spacing must be >= 1")
        if not (0 < self.thickness <= self.spacing):
            raise ValidationError("BackgroundSpec.thickness must be in 1..spacing")
        for attr in ("base_color", "line_color"):
            rgb = getattr(self, attr)
            if len(rgb) != 3 or any(not (0 <= int(c) <= 255) for c in rgb):
                raise ValidationError(f"BackgroundSpec.{attr} must be an RGB triple in 0..255")
            object.__setattr__(self, attr, tuple(int(c) for c in rgb))

    def key(self) -> str:
        """Short stable identifier used in episode metadata."""
        if self.kind == "black":
            return "black"
        base = "".join(f"{c:02x}" for c in self.base_color)
        line = "".join(f"{c:02x}" for c in self.line_color)
        return f"grid-{self.spacing}-{self.thickness}-{base}-{line}"


def make_background(spec: BackgroundSpec, width: int, height: int) -> Frame:
    """Render a background to a frame.

    Grid rule: a pixel (x, y) is line-colored iff x % spacing < thickness or
    y % spacing < thickness; otherwise base-colored. Black renders all zeros.
    """
    if width < 1 or height < 1:
        raise ValidationError("background size must be at least 1x1")
    if spec.kind == "black":
        return Frame(np.zeros((height, width, 3), dtype=np.uint8))
    xs = np.arange(width) % spec.spacing < spec.thickness
    ys = np.arange(height) % spec.spacing < spec.thickness
    on_line = ys[:, None] | xs[None, :]
    px = np.empty((height, width, 3), dtype=np.uint8)
    px[:] = np.asarray(spec.base_color, dtype=np.uint8)
    px[on_line] = np.asarray(spec.line_color, dtype=np.uint8)
    return Frame(px)


def union_masks(
    masks: Sequence[BinaryMask] | Iterable[BinaryMask],
    *,
    width: int | None = None,
    height: int | None = None,
) -> BinaryMask:
    """Pixelwise OR of masks; an empty sequence yields an all-zero mask.

    For an empty input the resolution cannot be inferred, so width and height
    must be supplied by the caller.
    """
    items = list(masks)
    if not items:
        if width is None or height is None:
            raise ValidationError("union of no masks needs explicit width and height")
        return BinaryMask.zeros(width, height)
    shape = items[0].pixels.shape
    for m in items[1:]:
        if m.pixels.shape != shape:
            raise ValidationError(f"mask shapes differ: {m.pixels.shape} vs {shape}")
    if width is not None and height is not None and shape != (height, width):
        raise ValidationError(f"masks are {shape[1]}x{shape[0]}, expected {width}x{height}")
    out = np.bitwise_or.reduce(np.stack([m.pixels for m in items], axis=0), axis=0)
    return BinaryMask(out)


def compose_frame(frame: Frame, mask: BinaryMask, background: Frame) -> Frame:
    """Keep frame pixels where mask is 1, background pixels where mask is 0."""
    if (mask.height, mask.width) != (frame.height, frame.width):
        raise ValidationError(
            f"mask is {mask.width}x{mask.height}, frame is {frame.width}x{frame.height}"
        )
    if (background.height, background.width) != (frame.height, frame.width):
        raise ValidationError(
            f"background is {background.width}x{background.height}, frame is "
            f"{frame.width}x{frame.height}"
        )
    keep = mask.pixels.astype(bool)[:, :, None]
    return Frame(np.where(keep, frame.pixels, background.pixels))
