"""Synthetic registration benchmark with ground-truth affines.

Replaces a proprietary flight dataset by warped crops of a textured base
image. Each case pairs a SAR-like source (rotated/flipped crop, multiplicative
speckle, optional occluding rectangles) with an optical-like reference (the
base embedded in a larger canvas) at one of four difficulty levels that fix
the overlap ratio ROA and the reference/source coverage ratio RSO.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass

import numpy as np

from .config import EngineConfig
from .descriptors import compute_descriptors
from .errors import GridRegError, InputError
from .grid import gridize
from .image import ImageBuffer
from .matching import candidate_sets, distance_matrix
from .metrics import DEFAULT_THRESHOLDS, mee
from .solver import solve
from .transform import AffineTransform2D

# level -> (ROA interval, RSO)
LEVELS = {
    "L-1": ((0.6, 0.8), 4.0),
    "L0": ((1.0, 1.0), 4.0),
    "L1": ((1.0, 1.0), 9.0),
    "L2": ((1.0, 1.0), 14.0),
}

CSV_HEADER = "case_id,level,seed,mee_px,success25,success50,success75,success100,wall_ms"


@dataclass
class DegradeOptions:
    speckle_looks: float | None = 4.0  # Gamma(L, 1/L) multiplicative noise; None = off
    occlusion_rects: int = 0  # filled rectangles on the source only
    occlusion_max_frac: float = 0.10


@dataclass
class SynthCase:
    source: ImageBuffer
    reference: ImageBuffer
    t_gt: AffineTransform2D  # source -> reference
    level: str
    seed: int
    degradations: dict


def bilinear_sample(data: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear interpolation with zero fill outside the raster."""
    h, w = data.shape
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0

    def grab(yy, xx):
        valid = (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
        out = np.zeros(xx.shape, dtype=np.float64)
        out[valid] = data[yy[valid], xx[valid]]
        return out

    v00 = grab(y0, x0)
    v01 = grab(y0, x0 + 1)
    v10 = grab(y0 + 1, x0)
    v11 = grab(y0 + 1, x0 + 1)
    top = v00 * (1 - fx) + v01 * fx
    bot = v10 * (1 - fx) + v11 * fx
    return top * (1 - fy) + bot * fy


def resample(image: ImageBuffer, mapping: AffineTransform2D, out_dims) -> ImageBuffer:
    """out[y, x] = image sampled at mapping(x, y); zero outside."""
    w, h = out_dims
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    pts = mapping.apply(np.column_stack([gx.ravel(), gy.ravel()]))
    vals = bilinear_sample(image.data, pts[:, 0], pts[:, 1])
    return ImageBuffer.from_array(np.clip(vals.reshape(h, w), 0.0, 1.0))


def make_textured_base(side: int, seed: int) -> ImageBuffer:
    """Deterministic multi-octave value noise; smooth enough for block matching."""
    rng = np.random.Generator(np.random.Philox(seed))
    acc = np.zeros((side, side))
    coords = np.arange(side, dtype=np.float64)
    gx, gy = np.meshgrid(coords, coords)
    for cell, weight in ((128, 1.0), (64, 0.6), (32, 0.35), (16, 0.18)):
        n = side // cell + 2
        coarse = rng.random((n, n))
        acc += weight * bilinear_sample(coarse, (gx / cell).ravel(), (gy / cell).ravel()).reshape(
            side, side
        )
    lo, hi = acc.min(), acc.max()
    return ImageBuffer.from_array((acc - lo) / (hi - lo))


# ---------------------------------------------------------------------------
# polygon clipping for overlap-area ratios
# ---------------------------------------------------------------------------

def _clip_halfplane(poly, a, b, c):
    """Keep the part of `poly` with a*x + b*y <= c (Sutherland-Hodgman step)."""
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        pin = a * p[0] + b * p[1] <= c
        qin = a * q[0] + b * q[1] <= c
        if pin:
            out.append(p)
        if pin != qin:
            t = (c - a * p[0] - b * p[1]) / (a * (q[0] - p[0]) + b * (q[1] - p[1]))
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _polygon_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    s = 0.0
    for i in range(len(poly)):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % len(poly)]
        s += x0 * y1 - x1 * y0
    return abs(s) / 2.0


def _overlap_fraction(corners, rect) -> float:
    """area(polygon ∩ axis-aligned rect) / area(polygon)."""
    x0, y0, x1, y1 = rect
    poly = [tuple(p) for p in corners]
    for a, b, c in ((-1, 0, -x0), (1, 0, x1), (0, -1, -y0), (0, 1, y1)):
        poly = _clip_halfplane(poly, a, b, c)
        if not poly:
            return 0.0
    return _polygon_area(poly) / _polygon_area([tuple(p) for p in corners])


# ---------------------------------------------------------------------------
# case generation
# ---------------------------------------------------------------------------

def _warp_linear(theta_deg: float, flip: bool) -> np.ndarray:
    th = math.radians(theta_deg)
    rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    if flip:
        rot = rot @ np.diag([-1.0, 1.0])
    return rot


def _footprint(lin: np.ndarray, center, size: int) -> np.ndarray:
    half = (size - 1) / 2.0
    corners = np.array([[-half, -half], [half, -half], [half, half], [-half, half]])
    return corners @ lin.T + np.asarray(center)


def synth_pair(
    base: ImageBuffer,
    level: str,
    seed: int,
    degrade: DegradeOptions | None = None,
    source_size: int = 400,
    rotation_mode: str = "axis",
) -> SynthCase:
    """Build one (source, reference, ground truth) case at the given level.

    The reference is a window onto the (zero-padded) base whose area is RSO
    times the source area; the source is a crop of the base warped by a random
    rotation/flip/translation and resampled bilinearly. rotation_mode "axis"
    draws 90-degree rotations, which the baseline descriptor is invariant to;
    "any" draws continuously from [0, 360) for use with learned descriptors.
    """
    if level not in LEVELS:
        raise InputError(f"unknown level {level!r}; expected one of {sorted(LEVELS)}")
    if rotation_mode not in ("axis", "any"):
        raise InputError(f"rotation_mode must be 'axis' or 'any', got {rotation_mode!r}")
    if base.width != base.height:
        raise InputError("base image must be square")
    (roa_lo, roa_hi), rso = LEVELS[level]
    opts = degrade if degrade is not None else DegradeOptions()
    rng = np.random.Generator(np.random.Philox(seed))

    s = source_size
    r = int(round(s * math.sqrt(rso)))
    bs = base.width

    theta = float(rng.integers(0, 4) * 90) if rotation_mode == "axis" else float(
        rng.uniform(0.0, 360.0)
    )
    flip = bool(rng.random() < 0.5)
    lin = _warp_linear(theta, flip)

    # reference window [w0, w0 + r) per axis onto the zero-padded base plane
    if r <= bs:
        w0 = rng.integers(0, bs - r + 1, size=2)
    else:
        w0 = -rng.integers(0, r - bs + 1, size=2)
    content_lo = np.maximum(w0, 0).astype(np.float64)
    content_hi = np.minimum(w0 + r, bs).astype(np.float64)

    # margin keeping the whole rotated footprint inside the content region
    th = math.radians(theta)
    margin = (s / 2.0) * (abs(math.cos(th)) + abs(math.sin(th))) + 2.0
    lo = content_lo + margin
    hi = content_hi - margin
    if np.any(hi <= lo):
        raise InputError(
            f"canvas does not fit: source {s} with level {level} needs a larger base"
        )
    center = lo + rng.random(2) * (hi - lo)

    roa_target = 1.0
    if roa_hi < 1.0 or roa_lo < 1.0:
        roa_target = float(rng.uniform(roa_lo, roa_hi))
        rect = (content_lo[0], content_lo[1], content_hi[0], content_hi[1])
        axis = int(rng.integers(0, 2))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        direction = np.zeros(2)
        direction[axis] = sign
        d_lo, d_hi = 0.0, float(hi[axis] - lo[axis]) + 2.0 * margin + s
        for _ in range(60):  # bisect the push distance until ROA hits the target
            d_mid = (d_lo + d_hi) / 2.0
            frac = _overlap_fraction(_footprint(lin, center + direction * d_mid, s), rect)
            if frac > roa_target:
                d_lo = d_mid
            else:
                d_hi = d_mid
        center = center + direction * ((d_lo + d_hi) / 2.0)

    half = (s - 1) / 2.0
    warp = AffineTransform2D.from_linear(lin, np.asarray(center) - lin @ np.array([half, half]))
    source = resample(base, warp, (s, s))

    degradations = {
        "rotation_deg": theta,
        "flip": flip,
        "speckle_looks": opts.speckle_looks,
        "occlusion_rects": 0,
        "roa_target": roa_target,
        "roa": _overlap_fraction(
            _footprint(lin, center, s),
            (content_lo[0], content_lo[1], content_hi[0], content_hi[1]),
        ),
        "rso": (r * r) / float(s * s),
    }

    data = source.data
    if opts.speckle_looks is not None:
        looks = float(opts.speckle_looks)
        gain = rng.gamma(shape=looks, scale=1.0 / looks, size=data.shape)
        data = np.clip(data * gain, 0.0, 1.0)
    if opts.occlusion_rects > 0:
        budget = opts.occlusion_max_frac * s * s / opts.occlusion_rects
        side_max = max(2, int(math.sqrt(budget)))
        data = data.copy()
        for _ in range(opts.occlusion_rects):
            rw = int(rng.integers(side_max // 2, side_max + 1))
            rh = int(rng.integers(side_max // 2, side_max + 1))
            x0 = int(rng.integers(0, s - rw + 1))
            y0 = int(rng.integers(0, s - rh + 1))
            data[y0 : y0 + rh, x0 : x0 + rw] = float(rng.random())
        degradations["occlusion_rects"] = opts.occlusion_rects
    source = ImageBuffer.from_array(data)

    canvas = np.zeros((r, r))
    cy0, cy1 = int(content_lo[1] - w0[1]), int(content_hi[1] - w0[1])
    cx0, cx1 = int(content_lo[0] - w0[0]), int(content_hi[0] - w0[0])
    canvas[cy0:cy1, cx0:cx1] = base.data[
        int(content_lo[1]) : int(content_hi[1]), int(content_lo[0]) : int(content_hi[0])
    ]
    reference = ImageBuffer.from_array(canvas)

    t_gt = AffineTransform2D.translate(-float(w0[0]), -float(w0[1])).compose(warp)
    return SynthCase(
        source=source,
        reference=reference,
        t_gt=t_gt,
        level=level,
        seed=seed,
        degradations=degradations,
    )


# ---------------------------------------------------------------------------
# benchmark runner
# ---------------------------------------------------------------------------

def register_case(case: SynthCase, cfg: EngineConfig) -> tuple[float, dict]:
    """Run the full pipeline on one case; returns (mee_px, diagnostics)."""
    sar_spec = gridize(case.source, cfg.patch, cfg.step)
    opt_spec = gridize(case.reference, cfg.patch, cfg.step)
    f_s = compute_descriptors(case.source, sar_spec, modality="sar")
    f_o = compute_descriptors(case.reference, opt_spec, modality="opt")
    d = distance_matrix(f_s, f_o)
    cands = candidate_sets(d, cfg.k, cfg.step, case.source.dims, case.reference.dims)
    solver_cfg = cfg.solver_config(case.source.dims, case.reference.dims)
    result = solve(d, cands, sar_spec, opt_spec, solver_cfg)
    value = mee(result.transform, case.t_gt, case.source.dims, case.reference.dims,
                stride=cfg.mee_stride)
    return value, result.diagnostics.as_dict()


def run_benchmark(cases, cfg: EngineConfig, timing: bool = False) -> list[dict]:
    """Evaluate the engine per case; solver failures record an infinite error.

    With timing off (the default) wall_ms is 0 so output files are
    byte-reproducible for a fixed seed.
    """
    rows = []
    for case_id, case in enumerate(cases):
        t0 = time.perf_counter()
        try:
            value, _ = register_case(case, cfg)
        except GridRegError:
            value = math.inf
        wall_ms = (time.perf_counter() - t0) * 1000.0 if timing else 0.0
        row = {
            "case_id": case_id,
            "level": case.level,
            "seed": case.seed,
            "mee_px": value,
            "wall_ms": wall_ms,
        }
        for th in DEFAULT_THRESHOLDS:
            row[f"success{int(th)}"] = int(value <= th)
        rows.append(row)
    return rows


def rows_to_csv(rows, extra_cols=()) -> str:
    """Render benchmark rows as CSV text (UTF-8 friendly, LF line endings)."""
    cols = CSV_HEADER.split(",")
    if extra_cols:
        cols = cols[:3] + list(extra_cols) + cols[3:]
    lines = [",".join(cols)]
    for row in rows:
        vals = []
        for col in cols:
            v = row[col]
            if isinstance(v, float):
                vals.append(repr(v) if math.isfinite(v) else "inf")
            else:
                vals.append(str(v))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def worker_count() -> int:
    """Worker cap from GRIDREG_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("GRIDREG_THREADS", "1")))
    except ValueError:
        return 1
