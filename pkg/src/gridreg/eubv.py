"""Equiangular unit basis vectors and the metric-learning losses built on them.

Everything here is plain float64 numpy. Each loss comes in two flavors: a
forward value and a ``*_with_grad`` variant returning analytic gradients with
respect to every input block, derived by hand through the softmax /
row-normalization chain. ``grad_check`` verifies those gradients against
central finite differences.

Conventions:
  * basis V is (n_a, c_v) with unit rows, pairwise cosine -1/(n_a - 1);
  * local embeddings E are (n_l, c_v), nominally unit rows;
  * rows whose norm would vanish under L2 normalization become zero-fallback
    rows: they stay zero, contribute zero to traces, and get zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InputError, NumericalError

ZERO_NORM_EPS = 1e-8


@dataclass(frozen=True)
class EUBVBasis:
    n_a: int
    c_v: int
    v: np.ndarray  # (n_a, c_v), unit rows

    def __post_init__(self):
        if self.v.shape != (self.n_a, self.c_v):
            raise InputError(f"basis shape {self.v.shape} != ({self.n_a}, {self.c_v})")


@dataclass
class LocalEmbeddings:
    n_l: int
    c_v: int
    e: np.ndarray  # (n_l, c_v), unit rows (or zero-fallback rows)

    def __post_init__(self):
        self.e = np.asarray(self.e, dtype=np.float64)
        if self.e.shape != (self.n_l, self.c_v):
            raise InputError(f"embedding shape {self.e.shape} != ({self.n_l}, {self.c_v})")
        norms = np.linalg.norm(self.e, axis=1)
        if np.any((np.abs(norms - 1.0) > 1e-5) & (norms > 0.0)):
            raise ContractError("embedding rows must be unit norm or zero-fallback")


@dataclass
class LossConfig:
    """Temperatures and margin. Defaults are common metric-learning values."""

    tau_a: float = 0.1
    tau_b: float = 0.05
    tau_b_j: float = 0.05
    tau_c: float = 0.1
    alpha: float = 0.1

    def __post_init__(self):
        for name in ("tau_a", "tau_b", "tau_b_j", "tau_c"):
            if getattr(self, name) <= 0.0:
                raise InputError(f"{name} must be > 0")


# ---------------------------------------------------------------------------
# basis construction
# ---------------------------------------------------------------------------

def make_eubvs(n_a: int) -> EUBVBasis:
    """Rows of L2Norm(I - J/n): unit vectors with equal pairwise angles.

    Any two distinct rows have cosine -1/(n_a - 1) and the rows sum to zero.
    """
    if n_a < 2:
        raise InputError(f"need at least 2 basis vectors, got {n_a}")
    raw = np.eye(n_a) - np.full((n_a, n_a), 1.0 / n_a)
    return EUBVBasis(n_a=n_a, c_v=n_a, v=raw / np.linalg.norm(raw, axis=1, keepdims=True))


# ---------------------------------------------------------------------------
# numerically stable primitives and their vector-Jacobian products
# ---------------------------------------------------------------------------

def _row_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _row_softmax_vjp(s: np.ndarray, ds: np.ndarray) -> np.ndarray:
    return s * (ds - np.sum(ds * s, axis=1, keepdims=True))


def _row_normalize(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    safe = np.where(norms < ZERO_NORM_EPS, 1.0, norms)
    r = np.where(norms < ZERO_NORM_EPS, 0.0, m / safe)
    return r, norms


def _row_normalize_vjp(r: np.ndarray, norms: np.ndarray, dr: np.ndarray) -> np.ndarray:
    # zero-fallback rows are flat zero: no gradient flows through them
    safe = np.where(norms < ZERO_NORM_EPS, 1.0, norms)
    dm = (dr - r * np.sum(dr * r, axis=1, keepdims=True)) / safe
    return np.where(norms < ZERO_NORM_EPS, 0.0, dm)


# ---------------------------------------------------------------------------
# correlation coefficients, descriptors, reconstructions
# ---------------------------------------------------------------------------

def correlation_coeffs(e: np.ndarray, basis: EUBVBasis, tau_a: float) -> np.ndarray:
    """Row-stochastic (n_l, n_a) softmax of E V^T / tau_a."""
    if tau_a <= 0.0:
        raise InputError("tau_a must be > 0")
    e = np.asarray(e, dtype=np.float64)
    if e.shape[1] != basis.c_v:
        raise InputError(f"embedding dim {e.shape[1]} != basis dim {basis.c_v}")
    return _row_softmax(e @ basis.v.T / tau_a)


def patch_descriptor(a: np.ndarray, basis: EUBVBasis) -> np.ndarray:
    """Aggregate one patch's correlation rows into a unit descriptor.

    g is the column mean of `a`; the descriptor is L2Norm(sum_i g_i v_i),
    or the zero-fallback vector when the combination cancels (as it does for
    uniform coefficients, since the basis rows sum to zero).
    """
    a = np.asarray(a, dtype=np.float64)
    g = a.mean(axis=0)
    raw = g @ basis.v
    norm = np.linalg.norm(raw)
    if norm < ZERO_NORM_EPS:
        return np.zeros(basis.c_v)
    return raw / norm


def reconstruct_embeddings(a: np.ndarray, basis: EUBVBasis) -> np.ndarray:
    """E_hat = L2Norm(A V), row-wise; zero rows fall back to zero."""
    r, _ = _row_normalize(np.asarray(a, dtype=np.float64) @ basis.v)
    return r


def reconstruct_eubvs_cross(
    e1: np.ndarray, e2: np.ndarray, basis: EUBVBasis, tau_b: float
) -> np.ndarray:
    """Reconstruct the basis from e1 vectors weighted by e2's coefficients.

    Row k of the result is L2Norm(sum_j B[k, j] e1[j]) where B is the softmax
    over the n_l embeddings of V e2^T / tau_b. Row k should approximate v_k.
    """
    w = _row_softmax(basis.v @ np.asarray(e2, dtype=np.float64).T / tau_b)
    r, _ = _row_normalize(w @ np.asarray(e1, dtype=np.float64))
    return r


def reconstruct_eubvs_joint(
    e1: np.ndarray, e2: np.ndarray, basis: EUBVBasis, tau_b_j: float
) -> np.ndarray:
    """Joint reconstruction mixing both modalities.

    Weights come from the concatenation (e2, e1), vectors from (e1, e2), so at
    matched positions the coefficient of an embedding is computed from its
    counterpart in the other modality.
    """
    c1 = np.vstack([e1, e2]).astype(np.float64)
    c2 = np.vstack([e2, e1]).astype(np.float64)
    w = _row_softmax(basis.v @ c2.T / tau_b_j)
    r, _ = _row_normalize(w @ c1)
    return r


# ---------------------------------------------------------------------------
# reconstruction trace terms (value + gradients)
# ---------------------------------------------------------------------------

def _recon_term(x, y, v, tau, want_grad=True):
    """trace(V Vhat^T) for the cross reconstruction Vhat(x, y), with d/dx, d/dy."""
    z = v @ y.T / tau
    w = _row_softmax(z)
    m = w @ x
    r, norms = _row_normalize(m)
    val = float(np.sum(v * r))
    if not want_grad:
        return val, None, None
    dm = _row_normalize_vjp(r, norms, v)
    dx = w.T @ dm
    dz = _row_softmax_vjp(w, dm @ x.T)
    dy = dz.T @ v / tau
    return val, dx, dy


def _recon_term_joint(x, y, v, tau, want_grad=True):
    """Joint-reconstruction trace term with gradients wrt both inputs."""
    n = x.shape[0]
    c1 = np.vstack([x, y])
    c2 = np.vstack([y, x])
    z = v @ c2.T / tau
    w = _row_softmax(z)
    m = w @ c1
    r, norms = _row_normalize(m)
    val = float(np.sum(v * r))
    if not want_grad:
        return val, None, None
    dm = _row_normalize_vjp(r, norms, v)
    dc1 = w.T @ dm
    dz = _row_softmax_vjp(w, dm @ c1.T)
    dc2 = dz.T @ v / tau
    dx = dc1[:n] + dc2[n:]
    dy = dc1[n:] + dc2[:n]
    return val, dx, dy


def _hat_forward(e, v, tau_a):
    a = _row_softmax(e @ v.T / tau_a)
    m = a @ v
    r, norms = _row_normalize(m)
    return r, (a, r, norms)


def _hat_vjp(e, v, tau_a, cache, dr):
    a, r, norms = cache
    dm = _row_normalize_vjp(r, norms, dr)
    dz = _row_softmax_vjp(a, dm @ v.T)
    return dz @ v / tau_a


_CROSS_TERMS = [
    ("e1", "e2"), ("e2", "e1"),
    ("h1", "e2"), ("e2", "h1"),
    ("e1", "h2"), ("h2", "e1"),
    ("h1", "h2"), ("h2", "h1"),
]
_JOINT_TERMS = [("e1", "e2"), ("h1", "e2"), ("e1", "h2"), ("h1", "h2")]


def _pair_loss(e1, e2, v, tau_a, tau, terms, term_fn, want_grad):
    """Negated sum of reconstruction trace terms for one (e1, e2) pair."""
    h1, c1 = _hat_forward(e1, v, tau_a)
    h2, c2 = _hat_forward(e2, v, tau_a)
    slots = {"e1": e1, "e2": e2, "h1": h1, "h2": h2}
    total = 0.0
    if not want_grad:
        for nx, ny in terms:
            total += term_fn(slots[nx], slots[ny], v, tau, want_grad=False)[0]
        return -total, None, None
    acc = {k: np.zeros_like(slots[k]) for k in slots}
    for nx, ny in terms:
        val, dx, dy = term_fn(slots[nx], slots[ny], v, tau)
        total += val
        acc[nx] += dx
        acc[ny] += dy
    de1 = acc["e1"] + _hat_vjp(e1, v, tau_a, c1, acc["h1"])
    de2 = acc["e2"] + _hat_vjp(e2, v, tau_a, c2, acc["h2"])
    return -total, -de1, -de2


def _pair_loss_cross(e1, e2, v, tau_a, tau_b, want_grad=True):
    return _pair_loss(e1, e2, v, tau_a, tau_b, _CROSS_TERMS, _recon_term, want_grad)


def _pair_loss_joint(e1, e2, v, tau_a, tau_b_j, want_grad=True):
    return _pair_loss(e1, e2, v, tau_a, tau_b_j, _JOINT_TERMS, _recon_term_joint, want_grad)


def _as_float(e):
    return np.asarray(e, dtype=np.float64)


def loss_cross_with_grad(e_sar, e_opt_w, e_sar_w, e_opt, basis: EUBVBasis, cfg: LossConfig):
    """Cross-modality consistency loss over S = {(sar, opt_w), (sar_w, opt)}."""
    e_sar, e_opt_w = _as_float(e_sar), _as_float(e_opt_w)
    e_sar_w, e_opt = _as_float(e_sar_w), _as_float(e_opt)
    l1, d_sar, d_opt_w = _pair_loss_cross(e_sar, e_opt_w, basis.v, cfg.tau_a, cfg.tau_b)
    l2, d_sar_w, d_opt = _pair_loss_cross(e_sar_w, e_opt, basis.v, cfg.tau_a, cfg.tau_b)
    grads = {"e_sar": d_sar, "e_opt_w": d_opt_w, "e_sar_w": d_sar_w, "e_opt": d_opt}
    return l1 + l2, grads


def loss_cross(e_sar, e_opt_w, e_sar_w, e_opt, basis: EUBVBasis, cfg: LossConfig) -> float:
    l1 = _pair_loss_cross(
        _as_float(e_sar), _as_float(e_opt_w), basis.v, cfg.tau_a, cfg.tau_b, want_grad=False
    )[0]
    l2 = _pair_loss_cross(
        _as_float(e_sar_w), _as_float(e_opt), basis.v, cfg.tau_a, cfg.tau_b, want_grad=False
    )[0]
    return l1 + l2


def loss_joint_with_grad(e_sar, e_opt_w, e_sar_w, e_opt, basis: EUBVBasis, cfg: LossConfig):
    """Joint multimodal consistency loss over the same pair set as loss_cross."""
    e_sar, e_opt_w = _as_float(e_sar), _as_float(e_opt_w)
    e_sar_w, e_opt = _as_float(e_sar_w), _as_float(e_opt)
    l1, d_sar, d_opt_w = _pair_loss_joint(e_sar, e_opt_w, basis.v, cfg.tau_a, cfg.tau_b_j)
    l2, d_sar_w, d_opt = _pair_loss_joint(e_sar_w, e_opt, basis.v, cfg.tau_a, cfg.tau_b_j)
    grads = {"e_sar": d_sar, "e_opt_w": d_opt_w, "e_sar_w": d_sar_w, "e_opt": d_opt}
    return l1 + l2, grads


def loss_joint(e_sar, e_opt_w, e_sar_w, e_opt, basis: EUBVBasis, cfg: LossConfig) -> float:
    l1 = _pair_loss_joint(
        _as_float(e_sar), _as_float(e_opt_w), basis.v, cfg.tau_a, cfg.tau_b_j, want_grad=False
    )[0]
    l2 = _pair_loss_joint(
        _as_float(e_sar_w), _as_float(e_opt), basis.v, cfg.tau_a, cfg.tau_b_j, want_grad=False
    )[0]
    return l1 + l2


# ---------------------------------------------------------------------------
# contrastive loss
# ---------------------------------------------------------------------------

def _check_unit_rows(g, name):
    norms = np.linalg.norm(g, axis=1)
    if np.any((np.abs(norms - 1.0) > 5e-3) & (norms > 5e-3)):
        raise ContractError(f"{name} rows must be L2-normalized (or zero-fallback)")


def _contrastive(g_s, g_o, cfg: LossConfig, want_grad: bool):
    g_s = _as_float(g_s)
    g_o = _as_float(g_o)
    if g_s.shape != g_o.shape:
        raise ContractError(f"descriptor batches differ in shape: {g_s.shape} vs {g_o.shape}")
    _check_unit_rows(g_s, "g_s")
    _check_unit_rows(g_o, "g_o")
    b = g_s.shape[0]
    tau, alpha = cfg.tau_c, cfg.alpha

    s_so = g_s @ g_o.T  # s_so[j, i] = <g_s_j, g_o_i>
    s_oo = g_o @ g_o.T
    s_ss = g_s @ g_s.T

    total = 0.0
    d_so = np.zeros_like(s_so)
    d_oo = np.zeros_like(s_oo)
    d_ss = np.zeros_like(s_ss)
    idx = np.arange(b)
    for i in range(b):
        others = idx[idx != i]
        a_pos = s_so[i, i] / tau
        if others.size == 0:
            continue  # Z reduces to the positive term: zero loss, zero gradient
        a_so = (s_so[others, i] + alpha) / tau
        a_oo = (s_oo[others, i] + alpha) / tau
        a_ss = (s_ss[others, i] + alpha) / tau
        # the sar_j/opt_i negative appears twice in the printed term list
        stacked = np.concatenate([[a_pos], a_so, a_so, a_oo, a_ss])
        hi = stacked.max()
        lse = hi + np.log(np.sum(np.exp(stacked - hi)))
        total += -a_pos + lse
        if not want_grad:
            continue
        wts = np.exp(stacked - lse)
        n = others.size
        d_so[i, i] += (-1.0 + wts[0]) / tau
        d_so[others, i] += (wts[1 : 1 + n] + wts[1 + n : 1 + 2 * n]) / tau
        d_oo[others, i] += wts[1 + 2 * n : 1 + 3 * n] / tau
        d_ss[others, i] += wts[1 + 3 * n :] / tau

    if not want_grad:
        return float(total), None
    dg_s = d_so @ g_o + (d_ss + d_ss.T) @ g_s
    dg_o = d_so.T @ g_s + (d_oo + d_oo.T) @ g_o
    return float(total), {"g_s": dg_s, "g_o": dg_o}


def contrastive_loss_with_grad(g_s, g_o, cfg: LossConfig):
    """InfoNCE-style loss over matched descriptor batches with margin alpha.

    The partition function for anchor i holds the positive term plus, for every
    j != i, four margin-shifted negatives: the sar_j/opt_i similarity twice (the
    printed term list repeats it transposed), opt_j/opt_i, and sar_j/sar_i.
    """
    return _contrastive(g_s, g_o, cfg, want_grad=True)


def contrastive_loss(g_s, g_o, cfg: LossConfig) -> float:
    return _contrastive(g_s, g_o, cfg, want_grad=False)[0]


# ---------------------------------------------------------------------------
# total loss
# ---------------------------------------------------------------------------

def total_loss_with_grad(e_sar, e_opt_w, e_sar_w, e_opt, g_s, g_o, basis: EUBVBasis, cfg: LossConfig):
    """Sum of cross, joint, and contrastive losses with merged gradients."""
    lc, gc = loss_cross_with_grad(e_sar, e_opt_w, e_sar_w, e_opt, basis, cfg)
    lj, gj = loss_joint_with_grad(e_sar, e_opt_w, e_sar_w, e_opt, basis, cfg)
    lk, gk = contrastive_loss_with_grad(g_s, g_o, cfg)
    grads = {k: gc[k] + gj[k] for k in gc}
    grads.update(gk)
    return lc + lj + lk, grads


def total_loss(e_sar, e_opt_w, e_sar_w, e_opt, g_s, g_o, basis: EUBVBasis, cfg: LossConfig) -> float:
    return (
        loss_cross(e_sar, e_opt_w, e_sar_w, e_opt, basis, cfg)
        + loss_joint(e_sar, e_opt_w, e_sar_w, e_opt, basis, cfg)
        + contrastive_loss(g_s, g_o, cfg)
    )


# ---------------------------------------------------------------------------
# finite-difference verification
# ---------------------------------------------------------------------------

def grad_check(fn, point, eps: float = 1e-5, value_fn=None) -> float:
    """Max relative error between analytic and central-difference gradients.

    `fn` maps a dict of arrays (or one array) to (value, grads) with grads
    mirroring the input structure. Relative error per entry is
    |g_fd - g| / max(1, |g_fd|, |g|). `value_fn`, when given, evaluates the
    loss alone and is used for the finite-difference probes (it must agree
    with fn's value, it just skips the gradient work).
    """
    if not 1e-6 <= eps <= 1e-3:
        raise InputError(f"eps must lie in [1e-6, 1e-3], got {eps}")
    single = not isinstance(point, dict)
    params = {"x": np.asarray(point, dtype=np.float64)} if single else {
        k: np.asarray(v, dtype=np.float64) for k, v in point.items()
    }

    def unwrap(p):
        return p["x"] if single else p

    def probe(p):
        val = value_fn(unwrap(p)) if value_fn is not None else fn(unwrap(p))[0]
        if not np.isfinite(val):
            raise NumericalError("loss is non-finite at a probe point")
        return val

    val0, grads = fn(unwrap(params))
    if not np.isfinite(val0):
        raise NumericalError("loss is non-finite at the expansion point")
    if single:
        grads = {"x": np.asarray(grads)}
    worst = 0.0
    for name, x in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        for idx in np.ndindex(*x.shape):
            orig = x[idx]
            x[idx] = orig + eps
            up = probe(params)
            x[idx] = orig - eps
            dn = probe(params)
            x[idx] = orig
            fd = (up - dn) / (2.0 * eps)
            rel = abs(fd - g[idx]) / max(1.0, abs(fd), abs(g[idx]))
            worst = max(worst, rel)
    return worst


def random_unit_rows(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random rows on the unit sphere (handy for tests and demos)."""
    m = rng.normal(size=(n, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)
