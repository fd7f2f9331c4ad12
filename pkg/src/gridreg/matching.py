"""Descriptor distance matrix and candidate correspondence sets.

Distances are negated cosine similarities, so smaller means more similar and
identical unit descriptors score -1. Candidate list sizes scale with the
reference/source coverage ratio and the grid step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .descriptors import DescriptorSet
from .errors import ContractError, InputError


@dataclass
class CandidateSets:
    p_c: np.ndarray  # (n_src, k_c) reference indices, ascending distance
    p_f: np.ndarray  # (n_src, k_f) superset used during refinement
    k_c: int
    k_f: int
    clamped: bool = False  # True when k_f had to be cut to the reference count


def distance_matrix(f_s: DescriptorSet, f_o: DescriptorSet) -> np.ndarray:
    """-F_S F_O^T clamped to [-1, 1]; zero-fallback rows give all-zero rows."""
    if f_s.dim != f_o.dim:
        raise ContractError(f"descriptor dims differ: {f_s.dim} vs {f_o.dim}")
    d = -(f_s.data.astype(np.float64) @ f_o.data.astype(np.float64).T)
    return np.clip(d, -1.0, 1.0)


def candidate_counts(k: int, step: int, sar_dims, opt_dims) -> tuple[int, int]:
    """(k_c, k_f) from the coverage-area ratio; k_f carries the extra factor 4.

    Rounding is half-up and k_c never drops below 1.
    """
    if k < 1:
        raise InputError(f"base K must be >= 1, got {k}")
    w_s, h_s = sar_dims
    w_o, h_o = opt_dims
    ratio = (w_o * h_o) / (w_s * h_s)
    k_c = max(1, int(math.floor(k * math.sqrt(ratio) * step / 16.0 + 0.5)))
    return k_c, 4 * k_c


def candidate_sets(d: np.ndarray, k: int, step: int, sar_dims, opt_dims) -> CandidateSets:
    """Per source row, the k_c / k_f nearest reference indices.

    Ties break toward the lower reference index so results are platform
    independent. If k_f exceeds the reference count both lists are clamped and
    the result is flagged.
    """
    d = np.asarray(d, dtype=np.float64)
    n_o = d.shape[1]
    k_c, k_f = candidate_counts(k, step, sar_dims, opt_dims)
    clamped = k_f > n_o
    k_f = min(k_f, n_o)
    k_c = min(k_c, k_f)
    order = np.argsort(d, axis=1, kind="stable")  # stable: equal values keep index order
    p_f = np.ascontiguousarray(order[:, :k_f])
    p_c = np.ascontiguousarray(order[:, :k_c])
    return CandidateSets(p_c=p_c, p_f=p_f, k_c=k_c, k_f=k_f, clamped=clamped)
