"""Shared 12-color vocabulary: names, RGB values, and nearest-color lookup."""

from __future__ import annotations

import math

# Fixed palette used by the simulator's entities and the color backend's
# quantizer. Values are plain RGB tuples, 0..255.
PALETTE: dict[str, tuple[int, int, int]] = {
    "red": (200, 40, 40),
    "green": (45, 160, 60),
    "blue": (40, 70, 200),
    "yellow": (220, 200, 50),
    "orange": (230, 130, 40),
    "purple": (130, 60, 180),
    "cyan": (50, 190, 190),
    "magenta": (200, 60, 160),
    "brown": (120, 80, 50),
    "white": (235, 230, 220),
    "gray": (130, 130, 130),
    "pink": (235, 150, 170),
}

COLOR_NAMES: tuple[str, ...] = tuple(PALETTE)


def color_distance(a: tuple[float, float, float], b: tuple[float, float, float]) -> float:
    """Euclidean distance in RGB space."""
    return math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))


def nearest_color_name(rgb: tuple[float, float, float]) -> str:
    """Name of the palette color nearest to rgb; ties break by palette order."""
    best = None
    best_d = math.inf
    for name in COLOR_NAMES:
        d = color_distance(rgb, PALETTE[name])
        if d < best_d:
            best, best_d = name, d
    assert best is not None
    return best
