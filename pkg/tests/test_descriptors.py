import numpy as np
import pytest

from gridreg.descriptors import (
    DescriptorSet,
    baseline_descriptor,
    compute_descriptors,
    read_descriptor_file,
    write_descriptor_file,
)
from gridreg.errors import ContractError, FormatError, InputError
from gridreg.grid import GridSpec, extract_patch, gridize
from gridreg.image import ImageBuffer


def rand_patch(side=256, seed=0):
    return np.random.default_rng(seed).random((side, side))


def rand_image(w, h, seed=0):
    return ImageBuffer.from_array(np.random.default_rng(seed).random((h, w)))


class TestBaselineDescriptor:
    def test_constant_patch_zero_fallback(self):
        assert np.all(baseline_descriptor(np.full((256, 256), 0.7)) == 0.0)

    def test_unit_norm(self):
        vec = baseline_descriptor(rand_patch())
        assert vec.shape == (256,)
        assert abs(np.linalg.norm(vec) - 1.0) <= 1e-6

    def test_intensity_affine_invariance(self):
        patch = rand_patch(seed=1) * 0.4 + 0.2
        a, b = 0.5, 0.17
        assert np.abs(
            baseline_descriptor(patch) - baseline_descriptor(a * patch + b)
        ).max() <= 1e-6

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_quarter_rotation_invariance(self, k):
        patch = rand_patch(seed=2)
        assert np.allclose(
            baseline_descriptor(patch), baseline_descriptor(np.rot90(patch, k)), atol=1e-9
        )

    def test_flip_invariance(self):
        patch = rand_patch(seed=3)
        for flipped in (patch[::-1], patch[:, ::-1], patch.T):
            assert np.allclose(
                baseline_descriptor(patch), baseline_descriptor(flipped), atol=1e-9
            )

    def test_side_not_divisible_by_16(self):
        with pytest.raises(InputError):
            baseline_descriptor(np.zeros((100, 100)))

    def test_non_square_rejected(self):
        with pytest.raises(InputError):
            baseline_descriptor(np.zeros((256, 128)))


class TestComputeDescriptors:
    def test_single_point_grid(self):
        img = rand_image(256, 256)
        spec = gridize(img, 256, 16)
        dset = compute_descriptors(img, spec)
        assert dset.data.shape == (1, 256)

    def test_deterministic(self):
        img = rand_image(288, 272, seed=4)
        spec = gridize(img, 256, 16)
        a = compute_descriptors(img, spec)
        b = compute_descriptors(img, spec)
        assert np.array_equal(a.data, b.data)

    def test_six_point_grid_unit_rows(self):
        img = rand_image(288, 272, seed=5)
        spec = gridize(img, 256, 16)
        dset = compute_descriptors(img, spec)
        assert dset.data.shape == (6, 256)
        norms = np.linalg.norm(dset.data.astype(np.float64), axis=1)
        assert np.abs(norms - 1.0).max() <= 1e-5

    def test_fast_path_matches_per_patch(self):
        img = rand_image(320, 304, seed=6)
        spec = gridize(img, 256, 16)
        fast = compute_descriptors(img, spec).data
        slow = np.stack(
            [baseline_descriptor(extract_patch(img, spec, i)) for i in range(spec.n_points)]
        ).astype(np.float32)
        assert np.array_equal(fast, slow)

    def test_fast_path_matches_per_patch_step32(self):
        img = rand_image(512, 352, seed=8)
        spec = gridize(img, 256, 32)
        fast = compute_descriptors(img, spec).data
        slow = np.stack(
            [baseline_descriptor(extract_patch(img, spec, i)) for i in range(spec.n_points)]
        ).astype(np.float32)
        assert np.array_equal(fast, slow)

    def test_custom_provider_rows_normalized(self):
        img = rand_image(64, 64, seed=7)
        spec = gridize(img, 32, 16)
        dset = compute_descriptors(img, spec, provider=lambda p: np.array([p.sum(), 1.0, 2.0]))
        assert dset.dim == 3
        norms = np.linalg.norm(dset.data.astype(np.float64), axis=1)
        assert np.abs(norms - 1.0).max() <= 1e-5

    def test_provider_dim_mismatch(self):
        img = rand_image(64, 64, seed=7)
        spec = gridize(img, 32, 16)
        calls = []

        def flaky(patch):
            calls.append(0)
            return np.ones(4) if len(calls) == 1 else np.ones(5)

        with pytest.raises(ContractError):
            compute_descriptors(img, spec, provider=flaky)

    def test_constant_region_zero_fallback_row(self):
        data = np.random.default_rng(9).random((272, 288))
        data[:264, :264] = 0.25  # covers the full first patch
        img = ImageBuffer.from_array(data)
        spec = gridize(img, 256, 16)
        dset = compute_descriptors(img, spec)
        assert np.all(dset.data[0] == 0.0)


def random_set(seed, n_w=3, n_h=2, dim=8):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(n_w * n_h, dim))
    data /= np.linalg.norm(data, axis=1, keepdims=True)
    return DescriptorSet(
        grid=GridSpec(patch=64, step=16, n_w=n_w, n_h=n_h),
        dim=dim,
        data=data.astype(np.float32),
        modality="sar",
    )


class TestGRDSFiles:
    def test_roundtrip_bit_exact(self, tmp_path):
        for seed in range(5):
            dset = random_set(seed)
            path = tmp_path / f"d{seed}.grds"
            write_descriptor_file(dset, path)
            back = read_descriptor_file(path, modality="sar")
            assert np.array_equal(back.data, dset.data)
            assert back.grid == dset.grid
            assert back.dim == dset.dim
            assert back.normalized == dset.normalized
            assert back.modality == "sar"

    def test_bad_magic(self, tmp_path):
        dset = random_set(0)
        path = tmp_path / "d.grds"
        write_descriptor_file(dset, path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError) as err:
            read_descriptor_file(path)
        assert err.value.offset == 0

    def test_version_mismatch(self, tmp_path):
        dset = random_set(0)
        path = tmp_path / "d.grds"
        write_descriptor_file(dset, path)
        raw = bytearray(path.read_bytes())
        raw[4] = 9
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError) as err:
            read_descriptor_file(path)
        assert err.value.offset == 4

    def test_truncated_payload(self, tmp_path):
        dset = random_set(0)
        path = tmp_path / "d.grds"
        write_descriptor_file(dset, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-5])
        with pytest.raises(FormatError) as err:
            read_descriptor_file(path)
        assert "truncated" in str(err.value)
        assert err.value.offset == len(raw) - 5

    def test_trailing_bytes_rejected(self, tmp_path):
        dset = random_set(0)
        path = tmp_path / "d.grds"
        write_descriptor_file(dset, path)
        path.write_bytes(path.read_bytes() + b"\x00\x00")
        with pytest.raises(FormatError):
            read_descriptor_file(path)

    def test_zero_fallback_rows_survive(self, tmp_path):
        dset = random_set(1)
        data = dset.data.copy()
        data[2] = 0.0
        dset = DescriptorSet(grid=dset.grid, dim=dset.dim, data=data, modality="opt")
        path = tmp_path / "d.grds"
        write_descriptor_file(dset, path)
        back = read_descriptor_file(path)
        assert np.all(back.data[2] == 0.0)

    def test_validation_rejects_non_unit_rows(self):
        grid = GridSpec(patch=64, step=16, n_w=2, n_h=1)
        with pytest.raises(ContractError):
            DescriptorSet(grid=grid, dim=3, data=np.full((2, 3), 2.0), modality="x")
