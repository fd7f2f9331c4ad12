import numpy as np
import pytest
import torch

from gridreg import eubv as ref
from descnet_trainer import (
    contrastive_loss,
    cross_loss,
    eubv_basis,
    joint_loss,
    loss_parity,
)


def to_t(a):
    return torch.from_numpy(np.asarray(a, dtype=np.float64))


def test_basis_matches_reference():
    for n_a in (2, 4, 16, 64):
        ours = eubv_basis(n_a, dtype=torch.float64).numpy()
        theirs = ref.make_eubvs(n_a).v
        assert np.abs(ours - theirs).max() <= 1e-12


def test_twenty_shared_instances_within_tolerance():
    worst = loss_parity(n_instances=20, seed=0)
    assert worst["max"] <= 1e-4, worst


def test_perfect_embedding_limits():
    basis = ref.make_eubvs(6)
    v = to_t(basis.v)
    assert float(cross_loss(v, v, v, v, v, 0.1, 1e-3)) == pytest.approx(-16 * 6, abs=1e-2)
    assert float(joint_loss(v, v, v, v, v, 0.1, 1e-3)) == pytest.approx(-8 * 6, abs=1e-2)


def test_contrastive_hand_values():
    rng = np.random.default_rng(1)
    g = ref.random_unit_rows(1, 6, rng)
    assert float(contrastive_loss(to_t(g), to_t(g.copy()), 0.1, 0.1)) == 0.0
    g2 = np.tile(ref.random_unit_rows(1, 6, rng), (2, 1))
    value = float(contrastive_loss(to_t(g2), to_t(g2.copy()), 0.1, 0.0))
    assert abs(value - 2.0 * np.log(5.0)) <= 1e-6


def test_zero_fallback_parity():
    rng = np.random.default_rng(2)
    basis = ref.make_eubvs(5)
    cfg = ref.LossConfig()
    blocks = [ref.random_unit_rows(7, 5, rng) for _ in range(4)]
    blocks[1][3] = 0.0
    expected = ref.loss_cross(*blocks, basis, cfg)
    got = float(cross_loss(*[to_t(b) for b in blocks], to_t(basis.v), cfg.tau_a, cfg.tau_b))
    assert abs(got - expected) <= 1e-10


def test_autograd_matches_reference_gradients():
    # torch autograd through our formulas vs the hand-derived reference grads
    rng = np.random.default_rng(3)
    basis = ref.make_eubvs(5)
    cfg = ref.LossConfig()
    blocks = [ref.random_unit_rows(6, 5, rng) for _ in range(4)]
    _, ref_grads = ref.loss_cross_with_grad(*blocks, basis, cfg)
    tensors = [to_t(b).requires_grad_(True) for b in blocks]
    loss = cross_loss(*tensors, to_t(basis.v), cfg.tau_a, cfg.tau_b)
    loss.backward()
    for tensor, key in zip(tensors, ("e_sar", "e_opt_w", "e_sar_w", "e_opt")):
        assert np.abs(tensor.grad.numpy() - ref_grads[key]).max() <= 1e-10
