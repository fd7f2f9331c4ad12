"""Cross-implementation parity checks against the gridreg reference losses."""

from __future__ import annotations

import numpy as np
import torch

from gridreg import eubv as ref

from . import losses as ours


def _torch(a: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.asarray(a, dtype=np.float64))


def loss_parity(n_instances: int = 20, seed: int = 0, n_l: int = 12, n_a: int = 8) -> dict:
    """Evaluate both implementations on identical random inputs.

    Returns per-term maximum absolute deviations plus the overall worst value
    under key "max". Everything runs in float64 so genuine formula mismatches
    dominate rounding.
    """
    rng = np.random.default_rng(seed)
    cfg = ref.LossConfig()
    basis = ref.make_eubvs(n_a)
    v_t = _torch(basis.v)
    worst = {"basis": 0.0, "cross": 0.0, "joint": 0.0, "contrastive": 0.0, "total": 0.0}

    worst["basis"] = float(
        np.abs(ours.eubv_basis(n_a, dtype=torch.float64).numpy() - basis.v).max()
    )
    for _ in range(n_instances):
        blocks = [ref.random_unit_rows(n_l, n_a, rng) for _ in range(4)]
        if rng.random() < 0.25:
            blocks[0] = blocks[0].copy()
            blocks[0][0] = 0.0  # zero-fallback row must agree too
        b = int(rng.integers(1, 9))
        g_s = ref.random_unit_rows(b, n_a, rng)
        g_o = ref.random_unit_rows(b, n_a, rng)

        r_cross = ref.loss_cross(*blocks, basis, cfg)
        r_joint = ref.loss_joint(*blocks, basis, cfg)
        r_con = ref.contrastive_loss(g_s, g_o, cfg)

        t_blocks = [_torch(x) for x in blocks]
        t_cross = float(ours.cross_loss(*t_blocks, v_t, cfg.tau_a, cfg.tau_b))
        t_joint = float(ours.joint_loss(*t_blocks, v_t, cfg.tau_a, cfg.tau_b_j))
        t_con = float(ours.contrastive_loss(_torch(g_s), _torch(g_o), cfg.tau_c, cfg.alpha))

        worst["cross"] = max(worst["cross"], abs(t_cross - r_cross))
        worst["joint"] = max(worst["joint"], abs(t_joint - r_joint))
        worst["contrastive"] = max(worst["contrastive"], abs(t_con - r_con))
        worst["total"] = max(
            worst["total"],
            abs((t_cross + t_joint + t_con) - (r_cross + r_joint + r_con)),
        )
    worst["max"] = max(worst.values())
    return worst
