"""Rasterization of world states to frames plus ground-truth masks.

Pixel (row i, col j) samples the world at the pixel center; y points up in
world space and down in pixel space. Paint order (low to high): background
texture, distractors, cross markers, remaining entities, gripper fingers.
Ground-truth masks are the visible footprints after higher layers are painted
over, so they are pairwise disjoint by construction.
"""

from __future__ import annotations

import numpy as np

from ..colors import PALETTE
from ..core import BinaryMask, EntitySummary, Frame
from .world import (
    EntityState,
    GripperState,
    ShiftSpec,
    WorldConfig,
    WorldState,
    entity_pixel_summaries,
    finger_centers,
)

GRIPPER_LEFT = "gripper_left"
GRIPPER_RIGHT = "gripper_right"

_STRIPE_B = (140, 150, 175)
_CHECKER_A = (105, 125, 105)
_CHECKER_B = (175, 160, 130)
_STRIPE_PX = 24
_CHECKER_PX = 20


def _texture(shift: ShiftSpec, config: WorldConfig) -> np.ndarray:
    w, h = config.px_width, config.px_height
    table = shift.table_tint if shift.table_tint is not None else config.table_color
    px = np.empty((h, w, 3), dtype=np.uint8)
    if shift.background_texture == "plain":
        px[:] = np.asarray(table, dtype=np.uint8)
    elif shift.background_texture == "stripes":
        px[:] = np.asarray(table, dtype=np.uint8)
        band = (np.arange(w) // _STRIPE_PX) % 2 == 1
        px[:, band] = np.asarray(_STRIPE_B, dtype=np.uint8)
    elif shift.background_texture == "checker":
        cells = ((np.arange(h)[:, None] // _CHECKER_PX) + (np.arange(w)[None, :] // _CHECKER_PX)) % 2
        px[:] = np.asarray(_CHECKER_A, dtype=np.uint8)
        px[cells == 1] = np.asarray(_CHECKER_B, dtype=np.uint8)
    elif shift.background_texture == "noise":
        rng = np.random.default_rng(shift.texture_seed)
        px[:] = rng.integers(30, 221, size=(h, w, 3), dtype=np.int64).astype(np.uint8)
    else:  # photo: smooth procedural pattern
        ii = np.arange(h)[:, None].astype(np.float64)
        jj = np.arange(w)[None, :].astype(np.float64)
        v0 = np.sin(jj / 19.0) + np.sin(ii / 13.0)
        v1 = np.sin((jj + ii) / 29.0) + np.sin(jj / 7.0 + ii / 23.0)
        v2 = np.sin((jj - ii) / 17.0) + np.sin(ii / 31.0)
        for c, v in enumerate((v0, v1, v2)):
            px[:, :, c] = np.clip((v + 2.0) / 4.0 * 140.0 + 60.0, 0, 255).astype(np.uint8)
    return px


def _world_grids(config: WorldConfig) -> tuple[np.ndarray, np.ndarray]:
    w, h = config.px_width, config.px_height
    ppu = config.px_per_unit
    wx = (np.arange(w, dtype=np.float64) + 0.5) / ppu
    wy = config.height - (np.arange(h, dtype=np.float64) + 0.5) / ppu
    return wx[None, :], wy[:, None]


def _entity_footprint(e: EntityState, wx: np.ndarray, wy: np.ndarray, config: WorldConfig) -> np.ndarray:
    dx = wx - e.x
    dy = wy - e.y
    if e.shape == "cube":
        return (np.abs(dx) <= config.cube_half) & (np.abs(dy) <= config.cube_half)
    if e.shape == "cross":
        arm, th = config.cross_arm, config.cross_thick / 2.0
        return ((np.abs(dx) <= th) & (np.abs(dy) <= arm)) | ((np.abs(dy) <= th) & (np.abs(dx) <= arm))
    if e.shape == "blob":
        r = config.blob_radius
        d0 = dx**2 + dy**2 <= r**2
        d1 = (dx - 0.8) ** 2 + (dy - 0.7) ** 2 <= (0.75 * r / 1.2) ** 2
        d2 = (dx + 0.75) ** 2 + (dy + 0.55) ** 2 <= (0.6 * r / 1.2) ** 2
        return d0 | d1 | d2
    raise ValueError(f"unknown shape {e.shape!r}")


def _finger_footprints(
    gripper: GripperState, wx: np.ndarray, wy: np.ndarray, config: WorldConfig
) -> tuple[np.ndarray, np.ndarray]:
    out = []
    for fx, fy in finger_centers(gripper, config):
        out.append(
            (np.abs(wx - fx) <= config.finger_width / 2.0)
            & (np.abs(wy - fy) <= config.finger_height / 2.0)
        )
    return out[0], out[1]


def _layer_rank(e: EntityState) -> int:
    if e.entity_id.startswith("distractor"):
        return 0
    if e.shape == "cross":
        return 1
    return 2


def render(
    state: WorldState,
    shift: ShiftSpec = ShiftSpec(),
    config: WorldConfig = WorldConfig(),
) -> tuple[Frame, dict[str, BinaryMask], tuple[EntitySummary, ...]]:
    """Rasterize a state; returns (frame, gt masks incl. fingers, entity summaries)."""
    px = _texture(shift, config)
    wx, wy = _world_grids(config)

    ordered = sorted(state.entities, key=lambda e: (_layer_rank(e), e.entity_id))
    footprints: list[tuple[str, np.ndarray, tuple[int, int, int]]] = []
    for e in ordered:
        footprints.append((e.entity_id, _entity_footprint(e, wx, wy, config), PALETTE[e.color]))
    left, right = _finger_footprints(state.gripper, wx, wy, config)
    gripper_rgb = PALETTE[shift.gripper_color]
    footprints.append((GRIPPER_LEFT, left, gripper_rgb))
    footprints.append((GRIPPER_RIGHT, right, gripper_rgb))

    covered = np.zeros(px.shape[:2], dtype=bool)
    gt: dict[str, BinaryMask] = {}
    # visibility: walk top-down so each layer subtracts everything above it
    for entity_id, footprint, rgb in reversed(footprints):
        visible = footprint & ~covered
        gt[entity_id] = BinaryMask.from_bool(visible)
        covered |= footprint
        px[visible] = np.asarray(rgb, dtype=np.uint8)

    return Frame(px), gt, entity_pixel_summaries(state, config)
