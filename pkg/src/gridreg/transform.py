"""2D affine transform algebra and estimation from point correspondences.

Transforms are 2x3 matrices ``[[a, b, tx], [c, d, ty]]`` applied to pixel
coordinates as ``(x', y') = (a*x + b*y + tx, c*x + d*y + ty)`` with x to the
right and y down.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, InputError

# Triangles with area below this (px^2) count as collinear for minimal-set fits.
COLLINEAR_AREA_EPS = 1e-9


@dataclass
class AffineTransform2D:
    m: np.ndarray = field(default_factory=lambda: np.eye(2, 3))

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=np.float64)
        if self.m.shape != (2, 3):
            raise InputError(f"affine matrix must be 2x3, got {self.m.shape}")
        if not np.all(np.isfinite(self.m)):
            raise InputError("affine matrix entries must be finite")

    @property
    def linear(self) -> np.ndarray:
        return self.m[:, :2]

    @property
    def translation(self) -> np.ndarray:
        return self.m[:, 2]

    def apply(self, points) -> np.ndarray:
        """Map points of shape (..., 2) through the transform."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.linear.T + self.translation

    def compose(self, inner: "AffineTransform2D") -> "AffineTransform2D":
        """Return the transform equivalent to applying `inner` first, then self."""
        lin = self.linear @ inner.linear
        t = self.linear @ inner.translation + self.translation
        return AffineTransform2D(np.column_stack([lin, t]))

    def inverse(self) -> "AffineTransform2D":
        det = np.linalg.det(self.linear)
        if abs(det) < 1e-12:
            raise DegenerateGeometryError("linear part is singular, cannot invert")
        inv = np.linalg.inv(self.linear)
        return AffineTransform2D(np.column_stack([inv, -inv @ self.translation]))

    @staticmethod
    def identity() -> "AffineTransform2D":
        return AffineTransform2D(np.eye(2, 3))

    @staticmethod
    def translate(tx: float, ty: float) -> "AffineTransform2D":
        return AffineTransform2D(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty]]))

    @staticmethod
    def from_linear(lin, t) -> "AffineTransform2D":
        lin = np.asarray(lin, dtype=np.float64).reshape(2, 2)
        t = np.asarray(t, dtype=np.float64).reshape(2)
        return AffineTransform2D(np.column_stack([lin, t]))

    def as_list(self):
        return [[float(v) for v in row] for row in self.m]


def apply_affine(t: AffineTransform2D, p) -> tuple[float, float]:
    """Apply `t` to a single point (x, y)."""
    out = t.apply(np.asarray(p, dtype=np.float64))
    return float(out[0]), float(out[1])


def triangle_area(p1, p2, p3) -> float:
    """Unsigned area of the triangle spanned by three points (px^2)."""
    p1 = np.asarray(p1, dtype=np.float64)
    v = np.asarray(p2, dtype=np.float64) - p1
    w = np.asarray(p3, dtype=np.float64) - p1
    return abs(v[0] * w[1] - v[1] * w[0]) / 2.0


def triangle_areas(tris: np.ndarray) -> np.ndarray:
    """Vectorized unsigned areas for a stack of triangles of shape (n, 3, 2)."""
    v = tris[:, 1, :] - tris[:, 0, :]
    w = tris[:, 2, :] - tris[:, 0, :]
    return np.abs(v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]) / 2.0


def estimate_affine_from_3(src_pts, dst_pts) -> AffineTransform2D:
    """Exact affine mapping three source points onto three target points.

    Raises DegenerateGeometryError when the source triangle is (near-)collinear.
    """
    src = np.asarray(src_pts, dtype=np.float64).reshape(3, 2)
    dst = np.asarray(dst_pts, dtype=np.float64).reshape(3, 2)
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise InputError("point coordinates must be finite")
    if triangle_area(src[0], src[1], src[2]) < COLLINEAR_AREA_EPS:
        raise DegenerateGeometryError("source points are collinear")
    design = np.column_stack([src, np.ones(3)])
    sol = np.linalg.solve(design, dst)  # rows: coefficients of x, y, 1
    return AffineTransform2D(sol.T)


def estimate_affine_lstsq(src_pts, dst_pts) -> AffineTransform2D:
    """Least-squares affine over n >= 3 correspondences."""
    src = np.asarray(src_pts, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst_pts, dtype=np.float64).reshape(-1, 2)
    if src.shape[0] < 3 or src.shape != dst.shape:
        raise InputError("need at least three matched point pairs")
    design = np.column_stack([src, np.ones(src.shape[0])])
    sol, _, rank, _ = np.linalg.lstsq(design, dst, rcond=None)
    if rank < 3:
        raise DegenerateGeometryError("correspondences do not span the plane")
    return AffineTransform2D(sol.T)
