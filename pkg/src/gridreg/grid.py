"""Sliding-window gridizing of images into overlapping patches.

Grid point i = i_y * n_w + i_x has its patch top-left at (i_x * step,
i_y * step) and its center (the grid point proper) at top-left + patch / 2.
Patches must be fully contained in the image, so the count per axis is
floor((dim - patch) / step) + 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .image import ImageBuffer


@dataclass(frozen=True)
class GridSpec:
    patch: int
    step: int
    n_w: int
    n_h: int

    @property
    def n_points(self) -> int:
        return self.n_w * self.n_h

    def top_left(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.n_points:
            raise IndexError(f"grid index {index} out of range [0, {self.n_points})")
        i_y, i_x = divmod(index, self.n_w)
        return (i_x * self.step, i_y * self.step)

    def centers(self) -> np.ndarray:
        """(n_points, 2) array of grid point centers in (x, y) pixel coords."""
        xs = np.arange(self.n_w) * self.step + self.patch / 2.0
        ys = np.arange(self.n_h) * self.step + self.patch / 2.0
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def min_extent(self) -> tuple[int, int]:
        """Smallest (width, height) an image must have to produce this grid."""
        return (
            (self.n_w - 1) * self.step + self.patch,
            (self.n_h - 1) * self.step + self.patch,
        )


def gridize(image: ImageBuffer, patch: int, step: int) -> GridSpec:
    """Grid geometry for fully contained patches over `image`."""
    if step < 1:
        raise InputError(f"step must be >= 1, got {step}")
    if patch < 1 or patch > min(image.width, image.height):
        raise InputError(
            f"patch {patch} does not fit in image {image.width}x{image.height}"
        )
    n_w = (image.width - patch) // step + 1
    n_h = (image.height - patch) // step + 1
    return GridSpec(patch=patch, step=step, n_w=n_w, n_h=n_h)


def extract_patch(image: ImageBuffer, spec: GridSpec, index: int) -> np.ndarray:
    """Copy of the patch raster for grid point `index`."""
    x0, y0 = spec.top_left(index)
    return image.data[y0 : y0 + spec.patch, x0 : x0 + spec.patch].copy()
