"""
Equiangular basis vectors and their losses
==========================================

Walks through the metric-learning mathematics: the equiangular unit basis, the
correlation coefficients of local embeddings, basis reconstruction, and the
three training losses with a finite-difference audit of their gradients.
"""

import math

import numpy as np

from gridreg import (
    LossConfig,
    contrastive_loss,
    correlation_coeffs,
    grad_check,
    loss_cross,
    loss_cross_with_grad,
    loss_joint,
    make_eubvs,
    patch_descriptor,
    total_loss,
)
from gridreg.eubv import random_unit_rows

# --- the basis -------------------------------------------------------------
basis = make_eubvs(8)
cos = basis.v @ basis.v.T
print(f"basis: {basis.n_a} unit vectors in R^{basis.c_v}")
print(f"pairwise cosine: {cos[0, 1]:+.5f} (expected {-1 / 7:+.5f})")
print(f"pairwise angle:  {math.degrees(math.acos(cos[0, 1])):.2f} deg")
print(f"row sum magnitude: {np.abs(basis.v.sum(axis=0)).max():.2e}")

# --- correlation coefficients and patch descriptors ------------------------
rng = np.random.default_rng(0)
embeddings = random_unit_rows(12, 8, rng)
a = correlation_coeffs(embeddings, basis, tau_a=0.1)
print(f"\ncorrelation rows sum to {a.sum(axis=1).mean():.6f}")
g = patch_descriptor(a, basis)
print(f"patch descriptor norm: {np.linalg.norm(g):.6f}")

# --- losses in the perfect-embedding limit ---------------------------------
cfg_limit = LossConfig(tau_b=1e-3, tau_b_j=1e-3)
v = basis.v
print("\nperfect-embedding limit (tau -> 0):")
print(f"  cross loss: {loss_cross(v, v, v, v, basis, cfg_limit):9.3f}  (-16*N_A = {-16 * 8})")
print(f"  joint loss: {loss_joint(v, v, v, v, basis, cfg_limit):9.3f}  (-8*N_A  = {-8 * 8})")

# --- losses at a random point, with gradient verification ------------------
cfg = LossConfig()
point = {k: random_unit_rows(12, 8, rng) for k in ("e_sar", "e_opt_w", "e_sar_w", "e_opt")}
g_s = random_unit_rows(4, 8, rng)
g_o = random_unit_rows(4, 8, rng)

print("\nrandom embeddings:")
print(f"  cross loss:       {loss_cross(*point.values(), basis, cfg):9.3f}")
print(f"  joint loss:       {loss_joint(*point.values(), basis, cfg):9.3f}")
print(f"  contrastive loss: {contrastive_loss(g_s, g_o, cfg):9.3f}")
print(f"  total loss:       {total_loss(*point.values(), g_s, g_o, basis, cfg):9.3f}")

err = grad_check(
    lambda p: loss_cross_with_grad(p["e_sar"], p["e_opt_w"], p["e_sar_w"], p["e_opt"], basis, cfg),
    point,
    value_fn=lambda p: loss_cross(p["e_sar"], p["e_opt_w"], p["e_sar_w"], p["e_opt"], basis, cfg),
)
print(f"\ncross-loss gradient vs central differences: max rel err {err:.2e}")
