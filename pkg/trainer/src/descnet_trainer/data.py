"""Synthetic co-registered patch pairs for training.

The optical side is a clean crop of a textured base; the SAR-like side is the
same crop under multiplicative speckle. Geometric augmentation (the eight
axis-aligned rotations/flips) is applied at batch time so the known warp can
also be applied to feature maps.
"""

from __future__ import annotations

import numpy as np
import torch

from gridreg.synth import make_textured_base


def make_pairs(
    n: int, patch: int = 128, seed: int = 0, speckle_looks: float = 4.0
) -> tuple[torch.Tensor, torch.Tensor]:
    """(sar, opt) tensors of shape (n, 1, patch, patch) in [0, 1]."""
    rng = np.random.Generator(np.random.Philox(seed))
    base = make_textured_base(max(4 * patch, 512), seed=seed + 1).data
    hi = base.shape[0] - patch
    opt = np.empty((n, patch, patch))
    for i in range(n):
        y0, x0 = rng.integers(0, hi + 1, size=2)
        opt[i] = base[y0 : y0 + patch, x0 : x0 + patch]
    gain = rng.gamma(shape=speckle_looks, scale=1.0 / speckle_looks, size=opt.shape)
    sar = np.clip(opt * gain, 0.0, 1.0)
    to_tensor = lambda a: torch.from_numpy(a).float().unsqueeze(1)
    return to_tensor(sar), to_tensor(opt)


def apply_d4(x: torch.Tensor, code: int) -> torch.Tensor:
    """One of the eight axis-aligned warps: code = rot * 2 + flip."""
    rot, flip = divmod(int(code), 2)
    if flip:
        x = torch.flip(x, dims=(-1,))
    return torch.rot90(x, rot, dims=(-2, -1))


def invert_d4(x: torch.Tensor, code: int) -> torch.Tensor:
    rot, flip = divmod(int(code), 2)
    x = torch.rot90(x, -rot, dims=(-2, -1))
    if flip:
        x = torch.flip(x, dims=(-1,))
    return x
