"""Torch implementations of the equiangular-basis training losses.

These mirror gridreg.eubv term for term (that package is the numerical
reference; parity is enforced by tests), but run under autograd so the
encoder can be trained with them.
"""

from __future__ import annotations

import torch

ZERO_NORM_EPS = 1e-8


def eubv_basis(n_a: int, dtype=torch.float32, device=None) -> torch.Tensor:
    """Rows of L2Norm(I - J/n): fixed equiangular unit basis vectors."""
    if n_a < 2:
        raise ValueError(f"need at least 2 basis vectors, got {n_a}")
    raw = torch.eye(n_a, dtype=dtype, device=device) - 1.0 / n_a
    return raw / raw.norm(dim=1, keepdim=True)


def safe_normalize(x: torch.Tensor) -> torch.Tensor:
    """Row L2 normalization with zero-fallback for vanishing rows."""
    norm = x.norm(dim=-1, keepdim=True)
    return torch.where(norm < ZERO_NORM_EPS, torch.zeros_like(x), x / norm.clamp_min(ZERO_NORM_EPS))


def correlation_coeffs(e: torch.Tensor, v: torch.Tensor, tau_a: float) -> torch.Tensor:
    return torch.softmax(e @ v.T / tau_a, dim=-1)


def reconstruct_embeddings(a: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    return safe_normalize(a @ v)


def _hat(e, v, tau_a):
    return reconstruct_embeddings(correlation_coeffs(e, v, tau_a), v)


def _recon_trace(x, y, v, tau):
    """trace(V Vhat^T) where Vhat reconstructs the basis from x weighted by y."""
    w = torch.softmax(v @ y.T / tau, dim=-1)
    return (v * safe_normalize(w @ x)).sum()


def _recon_trace_joint(x, y, v, tau):
    c1 = torch.cat([x, y], dim=0)
    c2 = torch.cat([y, x], dim=0)
    w = torch.softmax(v @ c2.T / tau, dim=-1)
    return (v * safe_normalize(w @ c1)).sum()


def _pair_cross(e1, e2, v, tau_a, tau_b):
    h1 = _hat(e1, v, tau_a)
    h2 = _hat(e2, v, tau_a)
    pairs = [
        (e1, e2), (e2, e1),
        (h1, e2), (e2, h1),
        (e1, h2), (h2, e1),
        (h1, h2), (h2, h1),
    ]
    return -sum(_recon_trace(x, y, v, tau_b) for x, y in pairs)


def _pair_joint(e1, e2, v, tau_a, tau_b_j):
    h1 = _hat(e1, v, tau_a)
    h2 = _hat(e2, v, tau_a)
    pairs = [(e1, e2), (h1, e2), (e1, h2), (h1, h2)]
    return -sum(_recon_trace_joint(x, y, v, tau_b_j) for x, y in pairs)


def cross_loss(e_sar, e_opt_w, e_sar_w, e_opt, v, tau_a: float, tau_b: float) -> torch.Tensor:
    """Cross-modality consistency over S = {(sar, opt_w), (sar_w, opt)}."""
    return _pair_cross(e_sar, e_opt_w, v, tau_a, tau_b) + _pair_cross(
        e_sar_w, e_opt, v, tau_a, tau_b
    )


def joint_loss(e_sar, e_opt_w, e_sar_w, e_opt, v, tau_a: float, tau_b_j: float) -> torch.Tensor:
    """Joint multimodal consistency over the same pair set."""
    return _pair_joint(e_sar, e_opt_w, v, tau_a, tau_b_j) + _pair_joint(
        e_sar_w, e_opt, v, tau_a, tau_b_j
    )


def contrastive_loss(g_s: torch.Tensor, g_o: torch.Tensor, tau_c: float, alpha: float) -> torch.Tensor:
    """Margin contrastive loss; the sar/opt negative enters twice per anchor."""
    b = g_s.shape[0]
    if b < 2:
        return g_s.new_zeros(())
    s_so = g_s @ g_o.T  # [j, i]
    s_oo = g_o @ g_o.T
    s_ss = g_s @ g_s.T
    pos = torch.diagonal(s_so) / tau_c  # (B,)
    ninf = torch.finfo(g_s.dtype).min
    eye = torch.eye(b, dtype=torch.bool, device=g_s.device)
    a_so = ((s_so + alpha) / tau_c).masked_fill(eye, ninf)
    a_oo = ((s_oo + alpha) / tau_c).masked_fill(eye, ninf)
    a_ss = ((s_ss + alpha) / tau_c).masked_fill(eye, ninf)
    stacked = torch.cat([pos.unsqueeze(0), a_so, a_so, a_oo, a_ss], dim=0)  # (1+4B, B)
    lse = torch.logsumexp(stacked, dim=0)
    return (lse - pos).sum()


def total_loss(e_sar, e_opt_w, e_sar_w, e_opt, g_s, g_o, v, cfg) -> torch.Tensor:
    """Eq-15-style sum; cfg carries tau_a/tau_b/tau_b_j/tau_c/alpha."""
    return (
        cross_loss(e_sar, e_opt_w, e_sar_w, e_opt, v, cfg.tau_a, cfg.tau_b)
        + joint_loss(e_sar, e_opt_w, e_sar_w, e_opt, v, cfg.tau_a, cfg.tau_b_j)
        + contrastive_loss(g_s, g_o, cfg.tau_c, cfg.alpha)
    )
