import numpy as np
import pytest

from gridreg.errors import DegenerateGeometryError, InputError
from gridreg.transform import (
    AffineTransform2D,
    apply_affine,
    estimate_affine_from_3,
    estimate_affine_lstsq,
    triangle_area,
)


def random_affine(rng):
    while True:
        lin = rng.uniform(-2, 2, size=(2, 2))
        if abs(np.linalg.det(lin)) > 0.1:
            return AffineTransform2D(np.column_stack([lin, rng.uniform(-50, 50, 2)]))


class TestApply:
    def test_identity(self):
        assert apply_affine(AffineTransform2D.identity(), (5, 7)) == (5.0, 7.0)

    def test_pure_translation(self):
        t = AffineTransform2D.translate(10, 20)
        assert apply_affine(t, (0, 0)) == (10.0, 20.0)

    def test_quarter_rotation(self):
        t = AffineTransform2D(np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0]]))
        x, y = apply_affine(t, (1, 0))
        assert (x, y) == (0.0, 1.0)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(0)
        t = random_affine(rng)
        pts = rng.uniform(-10, 10, size=(8, 2))
        batch = t.apply(pts)
        for p, q in zip(pts, batch):
            # batched and single-point paths may differ by one ulp (BLAS kernels)
            assert apply_affine(t, p) == pytest.approx((q[0], q[1]), rel=1e-14)

    def test_non_finite_rejected(self):
        with pytest.raises(InputError):
            AffineTransform2D(np.array([[1.0, 0.0, np.nan], [0.0, 1.0, 0.0]]))


class TestComposeInverse:
    def test_compose_order(self):
        scale = AffineTransform2D(np.array([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0]]))
        shift = AffineTransform2D.translate(1, 0)
        # scale after shift: (x+1)*2
        assert apply_affine(scale.compose(shift), (1, 0)) == (4.0, 0.0)

    def test_inverse_roundtrip(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            t = random_affine(rng)
            p = rng.uniform(-20, 20, 2)
            back = t.inverse().apply(t.apply(p))
            assert np.allclose(back, p, atol=1e-9)


class TestEstimateFrom3:
    def test_translation_case(self):
        t = estimate_affine_from_3(
            [(0, 0), (1, 0), (0, 1)], [(10, 20), (11, 20), (10, 21)]
        )
        assert np.allclose(t.m, [[1, 0, 10], [0, 1, 20]], atol=1e-12)

    def test_random_roundtrip_recovers_entries(self):
        # oracle: generate pairs from a known transform, re-estimate, compare
        rng = np.random.default_rng(2)
        for _ in range(25):
            t_true = random_affine(rng)
            src = rng.uniform(0, 100, size=(3, 2))
            if triangle_area(*src) < 1.0:
                continue
            t_est = estimate_affine_from_3(src, t_true.apply(src))
            assert np.abs(t_est.m - t_true.m).max() <= 1e-9

    def test_residual_bound(self):
        rng = np.random.default_rng(3)
        src = rng.uniform(0, 500, size=(3, 2))
        dst = rng.uniform(0, 500, size=(3, 2))
        t = estimate_affine_from_3(src, dst)
        assert np.abs(t.apply(src) - dst).max() <= 1e-6

    def test_collinear_sources_rejected(self):
        with pytest.raises(DegenerateGeometryError):
            estimate_affine_from_3([(0, 0), (1, 1), (2, 2)], [(0, 0), (1, 0), (2, 0)])


class TestLeastSquares:
    def test_exact_on_three_points(self):
        rng = np.random.default_rng(4)
        t_true = random_affine(rng)
        src = np.array([(0.0, 0.0), (50.0, 3.0), (7.0, 40.0)])
        t = estimate_affine_lstsq(src, t_true.apply(src))
        assert np.allclose(t.m, t_true.m, atol=1e-9)

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(5)
        src = rng.uniform(0, 200, size=(12, 2))
        dst = rng.uniform(0, 200, size=(12, 2))
        t = estimate_affine_lstsq(src, dst)
        a = np.column_stack([src, np.ones(12)])
        oracle = np.linalg.solve(a.T @ a, a.T @ dst).T
        assert np.allclose(t.m, oracle, atol=1e-8)

    def test_degenerate_rejected(self):
        src = np.array([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)])
        with pytest.raises(DegenerateGeometryError):
            estimate_affine_lstsq(src, src)


class TestTriangleArea:
    @pytest.mark.parametrize(
        "pts,area",
        [
            (((0, 0), (1, 0), (0, 1)), 0.5),
            (((0, 0), (1, 1), (2, 2)), 0.0),
            (((0, 0), (4, 0), (0, 3)), 6.0),
        ],
    )
    def test_known_values(self, pts, area):
        assert triangle_area(*pts) == pytest.approx(area, abs=1e-12)

    def test_permutation_and_translation_invariance(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            pts = rng.uniform(-5, 5, size=(3, 2))
            base = triangle_area(*pts)
            perm = pts[rng.permutation(3)]
            assert triangle_area(*perm) == pytest.approx(base, rel=1e-12)
            shifted = pts + rng.uniform(-100, 100, 2)
            assert triangle_area(*shifted) == pytest.approx(base, rel=1e-9, abs=1e-9)
