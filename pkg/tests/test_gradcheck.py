import numpy as np
import pytest

from gridreg.errors import InputError, NumericalError
from gridreg.eubv import (
    LossConfig,
    contrastive_loss_with_grad,
    grad_check,
    loss_cross_with_grad,
    loss_joint_with_grad,
    make_eubvs,
    random_unit_rows,
    total_loss_with_grad,
)


def embedding_point(rng, n_l=6, n_a=5):
    return {
        k: random_unit_rows(n_l, n_a, rng)
        for k in ("e_sar", "e_opt_w", "e_sar_w", "e_opt")
    }


def test_quadratic_is_exact():
    rng = np.random.default_rng(0)
    x = rng.normal(size=8)
    err = grad_check(lambda v: (float(v @ v), 2.0 * v), x, eps=1e-5)
    assert err <= 1e-8


def test_eps_bounds():
    with pytest.raises(InputError):
        grad_check(lambda v: (float(v @ v), 2.0 * v), np.ones(2), eps=1e-2)


def test_non_finite_loss_detected():
    def bad(v):
        return float("nan"), np.zeros_like(v)

    with pytest.raises(NumericalError):
        grad_check(bad, np.ones(3))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_loss_cross_gradients(seed):
    rng = np.random.default_rng(seed)
    basis = make_eubvs(5)
    cfg = LossConfig()
    point = embedding_point(rng)

    def fn(p):
        return loss_cross_with_grad(p["e_sar"], p["e_opt_w"], p["e_sar_w"], p["e_opt"], basis, cfg)

    assert grad_check(fn, point) <= 1e-4


@pytest.mark.parametrize("seed", [3, 4, 5])
def test_loss_joint_gradients(seed):
    rng = np.random.default_rng(seed)
    basis = make_eubvs(5)
    cfg = LossConfig()
    point = embedding_point(rng)

    def fn(p):
        return loss_joint_with_grad(p["e_sar"], p["e_opt_w"], p["e_sar_w"], p["e_opt"], basis, cfg)

    assert grad_check(fn, point) <= 1e-4


@pytest.mark.parametrize("seed", [6, 7, 8])
def test_contrastive_gradients(seed):
    rng = np.random.default_rng(seed)
    cfg = LossConfig()
    point = {"g_s": random_unit_rows(4, 5, rng), "g_o": random_unit_rows(4, 5, rng)}

    def fn(p):
        return contrastive_loss_with_grad(p["g_s"], p["g_o"], cfg)

    assert grad_check(fn, point) <= 1e-4


def test_total_loss_gradient_is_sum_of_parts():
    rng = np.random.default_rng(9)
    basis = make_eubvs(5)
    cfg = LossConfig()
    point = embedding_point(rng)
    point["g_s"] = random_unit_rows(3, 5, rng)
    point["g_o"] = random_unit_rows(3, 5, rng)

    def fn(p):
        return total_loss_with_grad(
            p["e_sar"], p["e_opt_w"], p["e_sar_w"], p["e_opt"], p["g_s"], p["g_o"], basis, cfg
        )

    assert grad_check(fn, point) <= 1e-4
