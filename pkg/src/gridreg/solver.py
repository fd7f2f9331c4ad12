"""Randomized coarse-to-fine affine solver over grid correspondences.

The coarse stage repeatedly samples three distinct source grid points with
partners from their candidate lists, rejects samples failing the equal-area
gate, fits an exact affine, and scores it with the global grid matching loss
(the sum over all source grid points of the descriptor distance to the
reference cell the transform selects). Candidates beating the refinement gate
are polished by re-estimating least squares over a growing support set; the
best state seen wins and is polished once more with a larger radius.

Randomness comes from a counter-based Philox stream, so runs are reproducible
across platforms for a fixed seed. Trials are drawn and scored in fixed-size
batches purely as a vectorization detail: a batch is abandoned at the first
accepted improvement and the unused trials are returned to the budget, which
keeps the sequential accept-first semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NoSolutionError
from .grid import GridSpec
from .matching import CandidateSets
from .transform import AffineTransform2D, triangle_areas

_CHUNK = 4096  # coarse samples per RNG batch; fixed, part of the stream layout
_REFINE_BATCH = 64


@dataclass
class SolverConfig:
    iterations: int
    beta: float = 1.0
    s_lo: float = 10.0 / 14.0
    s_hi: float = 14.0 / 10.0
    l_th_init: float = 0.0
    rho: float = 0.0
    r_l: float = 64.0
    r_g: float = 96.0
    iter_f_l: int = 200
    iter_f_g: int = 20000
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise InputError("iterations must be >= 1")
        if not (0.0 < self.s_lo < 1.0 < self.s_hi):
            raise InputError("area bounds must satisfy 0 < s_lo < 1 < s_hi")
        if self.r_l <= 0 or self.r_g <= 0:
            raise InputError("refinement radii must be > 0")
        if self.iter_f_l < 0 or self.iter_f_g < 0:
            raise InputError("refinement iteration counts must be >= 0")


@dataclass
class SolverDiagnostics:
    attempts: int = 0
    area_rejections: int = 0
    degenerate_skips: int = 0
    refinements: int = 0
    updates: int = 0

    def as_dict(self) -> dict:
        return {
            "attempts": self.attempts,
            "area_rejections": self.area_rejections,
            "degenerate_skips": self.degenerate_skips,
            "refinements": self.refinements,
            "updates": self.updates,
        }


@dataclass
class SolveResult:
    transform: AffineTransform2D
    l_min: float
    pairs: list  # supporting (source index, reference index) correspondences
    diagnostics: SolverDiagnostics = field(default_factory=SolverDiagnostics)


def area_constraint_ok(src_tri, dst_tri, s_lo: float, s_hi: float) -> bool:
    """Equal-area gate: s_lo <= area(src)/area(dst) <= s_hi, guarding dst ~ 0."""
    tris = np.stack(
        [np.asarray(src_tri, dtype=np.float64), np.asarray(dst_tri, dtype=np.float64)]
    )
    a_src, a_dst = triangle_areas(tris)
    if a_dst < 1e-9:
        return False
    ratio = a_src / a_dst
    return bool(s_lo <= ratio <= s_hi)


def _round_half_away(v: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def target_index(points, t: AffineTransform2D, opt_spec: GridSpec):
    """Reference grid index selected by mapping source points through `t`.

    Rounds half away from zero and clips to the grid, so every source point
    gets some reference cell.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    mapped = t.apply(pts.reshape(-1, 2))
    half = opt_spec.patch // 2
    ix = np.clip(_round_half_away((mapped[:, 0] - half) / opt_spec.step), 0, opt_spec.n_w - 1)
    iy = np.clip(_round_half_away((mapped[:, 1] - half) / opt_spec.step), 0, opt_spec.n_h - 1)
    idx = (iy * opt_spec.n_w + ix).astype(np.intp)
    return int(idx[0]) if single else idx


def matching_loss(
    t: AffineTransform2D, d: np.ndarray, sar_spec: GridSpec, opt_spec: GridSpec
) -> float:
    """Global grid matching loss: sum of d(i, target_index(i)) over all i."""
    centers = sar_spec.centers()
    mats = t.m.reshape(1, 2, 3)
    return float(
        _batched_losses(mats, np.asarray(d, dtype=np.float64), centers, opt_spec)[0]
    )


def _batched_losses(mats, d, sar_centers, opt_spec) -> np.ndarray:
    """Matching loss for a (b, 2, 3) stack of transform matrices."""
    mapped = sar_centers @ mats[:, :, :2].transpose(0, 2, 1) + mats[:, None, :, 2]
    half = opt_spec.patch // 2
    ix = np.clip(
        _round_half_away((mapped[:, :, 0] - half) / opt_spec.step), 0, opt_spec.n_w - 1
    )
    iy = np.clip(
        _round_half_away((mapped[:, :, 1] - half) / opt_spec.step), 0, opt_spec.n_h - 1
    )
    idx = (iy * opt_spec.n_w + ix).astype(np.intp)
    return d[np.arange(sar_centers.shape[0])[None, :], idx].sum(axis=1)


def _distinct_triples(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    """(count, 3) uniformly random distinct index triples (n >= 3)."""
    a = rng.integers(0, n, size=count)
    b = rng.integers(0, n - 1, size=count)
    b += b >= a
    c = rng.integers(0, n - 2, size=count)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    c += c >= lo
    c += c >= hi
    return np.column_stack([a, b, c])


class _Refiner:
    """Refinement over the fine candidate pool, shared by both stages.

    Each trial adds three pool pairs within the residual window
    (1 px, radius] to the running support set, re-fits the affine by least
    squares (normal equations on the homogeneous design), and keeps the fit
    only when the matching loss strictly improves.
    """

    def __init__(self, cands: CandidateSets, d, sar_centers, opt_centers, opt_spec):
        n_s, k_f = cands.p_f.shape
        self.pool_src = np.repeat(np.arange(n_s), k_f)
        self.pool_ref = cands.p_f.ravel()
        self.pool_s_xy = sar_centers[self.pool_src]
        self.pool_o_xy = opt_centers[self.pool_ref]
        self.pool_s_h = np.column_stack([self.pool_s_xy, np.ones(len(self.pool_src))])
        self.sar_centers = sar_centers
        self.opt_centers = opt_centers
        self.opt_spec = opt_spec
        self.d = d

    def _eligible(self, t, radius):
        res = np.linalg.norm(self.pool_o_xy - t.apply(self.pool_s_xy), axis=1)
        return np.nonzero((res > 1.0) & (res <= radius))[0]

    def refine(self, t, l_curr, pairs, radius, iters, rng, diag):
        """Monotone refinement: returns a state with loss <= the input loss."""
        cur_t, cur_l = t, l_curr
        cur_pairs = list(pairs)
        pair_set = set(cur_pairs)
        src_h = np.column_stack(
            [self.sar_centers[[i for i, _ in cur_pairs]], np.ones(len(cur_pairs))]
        )
        dst = self.opt_centers[[j for _, j in cur_pairs]]
        gram = src_h.T @ src_h
        moment = src_h.T @ dst
        eligible = None
        budget = iters
        while budget > 0:
            if eligible is None:
                eligible = self._eligible(cur_t, radius)
            if eligible.size < 3:
                break  # the pool is fixed while the transform is
            batch = min(_REFINE_BATCH, budget)
            budget -= batch
            picks = eligible[_distinct_triples(rng, eligible.size, batch)]  # (b, 3)
            new_mask = np.ones((batch, 3), dtype=bool)
            if pair_set:
                for b in range(batch):
                    for i in range(3):
                        p = picks[b, i]
                        if (int(self.pool_src[p]), int(self.pool_ref[p])) in pair_set:
                            new_mask[b, i] = False
            rows = self.pool_s_h[picks] * new_mask[:, :, None]
            dsts = self.pool_o_xy[picks] * new_mask[:, :, None]
            grams = gram + np.einsum("bij,bik->bjk", rows, rows)
            moments = moment + np.einsum("bij,bik->bjk", rows, dsts)
            try:
                sols = np.linalg.solve(grams, moments)  # (b, 3, 2)
            except np.linalg.LinAlgError:
                sols, bad = _solve_each(grams, moments)
                diag.degenerate_skips += int(bad.sum())
                losses = _batched_losses(
                    sols.transpose(0, 2, 1), self.d, self.sar_centers, self.opt_spec
                )
                losses[bad] = np.inf
            else:
                losses = _batched_losses(
                    sols.transpose(0, 2, 1), self.d, self.sar_centers, self.opt_spec
                )
            hits = np.nonzero(losses < cur_l)[0]
            if hits.size == 0:
                continue
            b = int(hits[0])
            budget += batch - (b + 1)  # trials after the accepted one are re-drawn
            added = [
                (int(self.pool_src[p]), int(self.pool_ref[p]))
                for i, p in enumerate(picks[b])
                if new_mask[b, i]
            ]
            cur_pairs += added
            pair_set.update(added)
            gram = grams[b]
            moment = moments[b]
            cur_t = AffineTransform2D(sols[b].T)
            cur_l = float(losses[b])
            eligible = None
        return cur_t, cur_l, cur_pairs


def _solve_each(grams, moments):
    """Row-by-row solve used when a batch contains a singular system."""
    sols = np.zeros_like(moments)
    bad = np.zeros(len(grams), dtype=bool)
    for i in range(len(grams)):
        try:
            sols[i] = np.linalg.solve(grams[i], moments[i])
        except np.linalg.LinAlgError:
            bad[i] = True
    return sols, bad


def solve(
    d: np.ndarray,
    cands: CandidateSets,
    sar_spec: GridSpec,
    opt_spec: GridSpec,
    cfg: SolverConfig,
    on_update=None,
) -> SolveResult:
    """Estimate the transform minimizing the grid matching loss.

    Raises NoSolutionError (carrying diagnostics) when no sample ever passes
    the area gate. `on_update` is called as (attempts_so_far, l_min) after
    every improvement, which tests use to audit monotonicity.
    """
    d = np.asarray(d, dtype=np.float64)
    n_s = sar_spec.n_points
    if cands.p_c.shape[0] != n_s or d.shape != (n_s, opt_spec.n_points):
        raise InputError("distance matrix / candidate sets do not match the grids")
    if n_s < 3:
        raise InputError("need at least three source grid points")

    rng = np.random.Generator(np.random.Philox(cfg.seed))
    sar_centers = sar_spec.centers()
    opt_centers = opt_spec.centers()
    refiner = _Refiner(cands, d, sar_centers, opt_centers, opt_spec)
    diag = SolverDiagnostics()

    best_t = None
    best_pairs: list = []
    l_min = np.inf
    l_th = cfg.l_th_init

    remaining = cfg.iterations
    while remaining > 0:
        m = min(_CHUNK, remaining)
        remaining -= m
        diag.attempts += m
        src = _distinct_triples(rng, n_s, m)
        ranks = rng.integers(0, cands.k_c, size=(m, 3))
        ref = cands.p_c[src, ranks]
        s_tri = sar_centers[src]  # (m, 3, 2)
        o_tri = opt_centers[ref]
        a_src = triangle_areas(s_tri)
        a_dst = triangle_areas(o_tri)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = a_src / a_dst
        ok = (a_dst >= 1e-9) & (a_src >= 1e-9) & (ratio >= cfg.s_lo) & (ratio <= cfg.s_hi)
        diag.area_rejections += int(m - ok.sum())
        survivors = np.nonzero(ok)[0]
        if survivors.size == 0:
            continue
        design = np.concatenate(
            [s_tri[survivors], np.ones((survivors.size, 3, 1))], axis=2
        )
        try:
            sols = np.linalg.solve(design, o_tri[survivors])  # (k, 3, 2)
        except np.linalg.LinAlgError:
            sols, bad = _solve_each(design, o_tri[survivors])
            diag.degenerate_skips += int(bad.sum())
        else:
            bad = np.zeros(survivors.size, dtype=bool)
        losses = _batched_losses(sols.transpose(0, 2, 1), d, sar_centers, opt_spec)
        for pos, row in enumerate(survivors):
            if bad[pos]:
                continue
            t = AffineTransform2D(sols[pos].T)
            l_curr = float(losses[pos])
            pairs = [(int(s), int(r)) for s, r in zip(src[row], ref[row])]
            if l_curr <= l_th and cfg.iter_f_l > 0:
                diag.refinements += 1
                t, l_curr, pairs = refiner.refine(
                    t, l_curr, pairs, cfg.r_l, cfg.iter_f_l, rng, diag
                )
            if l_curr < l_min:
                l_min = l_curr
                l_th = l_curr + cfg.rho
                best_t, best_pairs = t, pairs
                diag.updates += 1
                if on_update is not None:
                    on_update(diag.attempts, l_min)

    if best_t is None:
        raise NoSolutionError(
            "no coarse sample passed the area constraint", diagnostics=diag
        )

    if cfg.iter_f_g > 0:
        best_t, l_min, best_pairs = refiner.refine(
            best_t, l_min, best_pairs, cfg.r_g, cfg.iter_f_g, rng, diag
        )
    return SolveResult(transform=best_t, l_min=l_min, pairs=best_pairs, diagnostics=diag)


def local_refine(
    t: AffineTransform2D,
    l_curr: float,
    pairs: list,
    cands: CandidateSets,
    d: np.ndarray,
    sar_spec: GridSpec,
    opt_spec: GridSpec,
    radius: float,
    iters: int,
    rng: np.random.Generator,
) -> tuple[AffineTransform2D, float, list]:
    """Standalone refinement pass over the candidate pool (see _Refiner)."""
    refiner = _Refiner(
        cands,
        np.asarray(d, dtype=np.float64),
        sar_spec.centers(),
        opt_spec.centers(),
        opt_spec,
    )
    return refiner.refine(
        t, l_curr, list(pairs), radius, iters, rng, SolverDiagnostics()
    )
