"""Axis-aligned boxes shared by the simulator and scene filtering."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def contains(self, pts) -> np.ndarray:
        """Closed-box membership for (..., 3) points."""
        pts = np.asarray(pts, dtype=np.float64)
        return np.all((pts >= np.asarray(self.lo)) & (pts <= np.asarray(self.hi)), axis=-1)

    def contains_xy(self, pts, eps: float = 1e-9) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)[..., :2]
        lo, hi = np.asarray(self.lo)[:2], np.asarray(self.hi)[:2]
        return np.all((pts >= lo - eps) & (pts <= hi + eps), axis=-1)

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lo) + np.asarray(self.hi)) / 2

    def grid(self, nx: int, ny: int, z: float) -> np.ndarray:
        """Regular (nx*ny, 3) grid of points covering the box footprint at height z."""
        xs = np.linspace(self.lo[0], self.hi[0], nx)
        ys = np.linspace(self.lo[1], self.hi[1], ny)
        xx, yy = np.meshgrid(xs, ys, indexing="xy")
        return np.stack([xx.ravel(), yy.ravel(), np.full(xx.size, z)], -1)


def table_box(half_extent: float = 0.12, height: float = 0.05, floor: float = 1e-3) -> Box:
    """Region above the table; ``floor`` excludes points lying on the table itself."""
    return Box((-half_extent, -half_extent, floor), (half_extent, half_extent, height))
