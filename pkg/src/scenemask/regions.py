"""Unprompted region proposal by color quantization plus connected components.

Pixels are first split into a background cluster (everything near the frame's
dominant color) and the 12 shared palette colors; each palette color's
connected components become candidate regions, annotated with a numeric id,
mask, centroid, and mean color. Ids follow raster order of the centroids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .colors import COLOR_NAMES, PALETTE, nearest_color_name
from .core import BinaryMask, BoundingBox, EntitySummary, Frame

# Pixels closer than this to the dominant frame color belong to the background
# cluster and never form regions.
BACKGROUND_DISTANCE = 30.0

# Components smaller than this are treated as quantization noise.
MIN_REGION_AREA = 6

# Bounding-box fill ratio thresholds for the shape tagger.
CUBE_FILL_MIN = 0.88
CROSS_FILL_MAX = 0.60


@dataclass(frozen=True)
class RegionAnnotation:
    """One proposed region: numeric id, mask, pixel centroid, mean RGB."""

    region_id: int
    mask: BinaryMask
    centroid: tuple[float, float]
    mean_color: tuple[float, float, float]

    def __post_init__(self) -> None:
        if self.region_id < 1:
            raise ValueError("region ids start at 1")
        if self.mask.is_empty():
            raise ValueError("region mask must be non-empty")


def dominant_color(frame: Frame) -> tuple[int, int, int]:
    """Most frequent exact pixel value; ties break by smallest RGB tuple."""
    flat = frame.pixels.reshape(-1, 3).astype(np.int32)
    packed = (flat[:, 0] << 16) | (flat[:, 1] << 8) | flat[:, 2]  # order == RGB lexicographic
    values, counts = np.unique(packed, return_counts=True)
    best = int(values[counts == counts.max()].min())
    return (best >> 16, (best >> 8) & 0xFF, best & 0xFF)


_PALETTE_MATRIX = np.asarray([PALETTE[name] for name in COLOR_NAMES], dtype=np.float32)
_PALETTE_NORMS = (_PALETTE_MATRIX**2).sum(axis=1)


def quantize(frame: Frame) -> np.ndarray:
    """Per-pixel palette index (0..11), or -1 for the background cluster.

    Distances expand as |p|^2 - 2 p.c + |c|^2; the |p|^2 term is shared, so
    the argmin needs only the matmul term. All products stay below 2^24, so
    float32 keeps the comparison exact.
    """
    h, w = frame.pixels.shape[:2]
    px = frame.pixels.reshape(-1, 3).astype(np.float32)
    mode = np.asarray(dominant_color(frame), dtype=np.float32)
    bg = ((px - mode) ** 2).sum(axis=1) <= BACKGROUND_DISTANCE * BACKGROUND_DISTANCE
    scores = _PALETTE_NORMS[None, :] - 2.0 * (px @ _PALETTE_MATRIX.T)
    labels = scores.argmin(axis=1).astype(np.int64)
    labels[bg] = -1
    return labels.reshape(h, w)


def mask_centroid(mask: BinaryMask) -> tuple[float, float]:
    """Mean (x, y) of set pixels; mask must be non-empty."""
    ys, xs = np.nonzero(mask.pixels)
    if xs.size == 0:
        raise ValueError("centroid of an empty mask is undefined")
    return (float(xs.mean()), float(ys.mean()))


def mask_tight_box(mask: BinaryMask) -> BoundingBox | None:
    """Tight inclusive-exclusive bounding box of set pixels; None if empty."""
    ys, xs = np.nonzero(mask.pixels)
    if xs.size == 0:
        return None
    return BoundingBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union; two empty masks count as perfectly matching."""
    inter = int(np.bitwise_and(a.pixels, b.pixels).sum())
    union = int(np.bitwise_or(a.pixels, b.pixels).sum())
    if union == 0:
        return 1.0
    return inter / union


def mean_color(frame: Frame, mask: BinaryMask) -> tuple[float, float, float]:
    sel = frame.pixels[mask.pixels.astype(bool)]
    m = sel.mean(axis=0)
    return (float(m[0]), float(m[1]), float(m[2]))


def propose_regions(frame: Frame, *, min_area: int = MIN_REGION_AREA) -> list[RegionAnnotation]:
    """Candidate regions of a frame, ids assigned in raster order of centroids."""
    labels = quantize(frame)
    found: list[tuple[tuple[float, float], BinaryMask]] = []
    for color_idx in range(len(COLOR_NAMES)):
        color_mask = labels == color_idx
        if not color_mask.any():
            continue
        comp, n = ndimage.label(color_mask)
        areas = np.bincount(comp.ravel(), minlength=n + 1)
        for k in range(1, n + 1):
            if areas[k] < min_area:
                continue
            mask = BinaryMask.from_bool(comp == k)
            found.append((mask_centroid(mask), mask))
    found.sort(key=lambda item: (item[0][1], item[0][0]))
    out = []
    for i, (centroid, mask) in enumerate(found, start=1):
        out.append(
            RegionAnnotation(
                region_id=i,
                mask=mask,
                centroid=centroid,
                mean_color=mean_color(frame, mask),
            )
        )
    return out


def classify_region_shape(mask: BinaryMask) -> str:
    """Tag a region as cube, cross, or blob from its bounding-box fill ratio."""
    box = mask_tight_box(mask)
    assert box is not None, "cannot classify an empty region"
    fill = mask.area / (box.width * box.height)
    if fill >= CUBE_FILL_MIN:
        return "cube"
    if fill <= CROSS_FILL_MAX:
        return "cross"
    return "blob"


def annotation_summaries(annotations: list[RegionAnnotation]) -> list[EntitySummary]:
    """Entity-style summaries for regions so prompts can resolve over them."""
    return [
        EntitySummary(
            entity_id=str(a.region_id),
            shape=classify_region_shape(a.mask),
            color=nearest_color_name(a.mean_color),
            centroid=a.centroid,
        )
        for a in annotations
    ]


def point_in_region(annotations: list[RegionAnnotation], x: int, y: int) -> RegionAnnotation | None:
    """The annotation whose mask contains (x, y), if any."""
    for a in annotations:
        h, w = a.mask.pixels.shape
        if 0 <= y < h and 0 <= x < w and a.mask.pixels[y, x]:
            return a
    return None


def region_anchor_point(region: RegionAnnotation) -> tuple[int, int]:
    """An integer point guaranteed inside the region, near its centroid."""
    cx, cy = region.centroid
    x, y = int(round(cx)), int(round(cy))
    h, w = region.mask.pixels.shape
    if 0 <= y < h and 0 <= x < w and region.mask.pixels[y, x]:
        return x, y
    ys, xs = np.nonzero(region.mask.pixels)
    d2 = (xs - cx) ** 2 + (ys - cy) ** 2
    order = np.lexsort((xs, ys, d2))[0]
    return int(xs[order]), int(ys[order])
