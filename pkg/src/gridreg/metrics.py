"""Registration quality metrics: median mapping error and success rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NoOverlapError
from .transform import AffineTransform2D

DEFAULT_THRESHOLDS = (25.0, 50.0, 75.0, 100.0)


@dataclass
class EvalReport:
    mee: float
    n_eval_points: int
    success: dict  # threshold (px) -> bool

    def as_dict(self) -> dict:
        return {
            "mee_px": self.mee,
            "n_eval_points": self.n_eval_points,
            "success": {str(int(th)): bool(v) for th, v in sorted(self.success.items())},
        }


def _overlap_errors(t_hat, t_gt, sar_dims, opt_dims, stride):
    if stride < 1:
        raise InputError("stride must be >= 1")
    w_s, h_s = sar_dims
    w_o, h_o = opt_dims
    xs = np.arange(0, w_s, stride, dtype=np.float64)
    ys = np.arange(0, h_s, stride, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    gt = t_gt.apply(pts)
    inside = (
        (gt[:, 0] >= 0.0)
        & (gt[:, 0] <= w_o - 1.0)
        & (gt[:, 1] >= 0.0)
        & (gt[:, 1] <= h_o - 1.0)
    )
    if not np.any(inside):
        raise NoOverlapError("ground truth maps no source pixel into the reference")
    return np.linalg.norm(t_hat.apply(pts[inside]) - gt[inside], axis=1)


def mee(
    t_hat: AffineTransform2D,
    t_gt: AffineTransform2D,
    sar_dims,
    opt_dims,
    stride: int = 4,
) -> float:
    """Median distance between the two mappings over overlapping source pixels.

    A pixel participates when its ground-truth image lands inside the reference
    bounds. `stride` subsamples the source lattice; stride 1 is the exact mode.
    """
    return float(np.median(_overlap_errors(t_hat, t_gt, sar_dims, opt_dims, stride)))


def success_rate(mees, th: float) -> float:
    """Fraction of cases with mee <= th (inclusive)."""
    if th <= 0:
        raise InputError("threshold must be > 0")
    vals = np.asarray(list(mees), dtype=np.float64)
    if vals.size == 0:
        raise InputError("success rate over an empty list is undefined")
    return float(np.count_nonzero(vals <= th) / vals.size)


def evaluate(
    t_hat: AffineTransform2D,
    t_gt: AffineTransform2D,
    sar_dims,
    opt_dims,
    thresholds=DEFAULT_THRESHOLDS,
    stride: int = 4,
) -> EvalReport:
    """MEE plus per-threshold success flags for one registration."""
    errors = _overlap_errors(t_hat, t_gt, sar_dims, opt_dims, stride)
    value = float(np.median(errors))
    return EvalReport(
        mee=value,
        n_eval_points=int(errors.size),
        success={float(th): value <= th for th in thresholds},
    )
