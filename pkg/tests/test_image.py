import numpy as np
import pytest
from PIL import Image

from gridreg.errors import DimensionError, FormatError, InputError
from gridreg.image import ImageBuffer, load_image, save_image, to_grayscale


class TestImageBuffer:
    def test_rejects_wrong_length(self):
        with pytest.raises(DimensionError):
            ImageBuffer(width=4, height=3, data=np.zeros((4, 3)))

    def test_rejects_out_of_range(self):
        with pytest.raises(InputError):
            ImageBuffer.from_array(np.array([[0.0, 1.5]]))

    def test_rejects_nan(self):
        with pytest.raises(InputError):
            ImageBuffer.from_array(np.array([[0.0, np.nan]]))

    def test_dims_order(self):
        buf = ImageBuffer.from_array(np.zeros((3, 7)))
        assert buf.dims == (7, 3)
        assert buf.area == 21


class TestToGrayscale:
    @pytest.mark.parametrize(
        "pixel,value",
        [((1, 1, 1), 1.0), ((0, 0, 0), 0.0), ((1, 0, 0), 0.299)],
    )
    def test_luma_weights(self, pixel, value):
        rgb = np.array([[pixel]], dtype=np.float64)
        assert to_grayscale(rgb).data[0, 0] == pytest.approx(value, abs=1e-12)

    def test_shape_preserved(self):
        rng = np.random.default_rng(0)
        rgb = rng.random((5, 9, 3))
        out = to_grayscale(rgb)
        assert (out.height, out.width) == (5, 9)

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError):
            to_grayscale(np.zeros((4, 4, 2)))


class TestFileIO:
    def test_png_8bit_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        buf = ImageBuffer.from_array(np.round(rng.random((12, 10)) * 255) / 255)
        path = tmp_path / "img.png"
        save_image(buf, path)
        back = load_image(path)
        assert back.dims == buf.dims
        assert np.allclose(back.data, buf.data, atol=1e-9)

    def test_png_16bit_scaling(self, tmp_path):
        arr = np.array([[0, 32768, 65535]], dtype=np.uint16)
        path = tmp_path / "img16.png"
        Image.fromarray(arr).save(path)
        buf = load_image(path)
        assert buf.data[0, 0] == 0.0
        assert buf.data[0, 2] == 1.0
        assert buf.data[0, 1] == pytest.approx(32768 / 65535)

    def test_rgb_png_goes_through_luma(self, tmp_path):
        arr = np.zeros((2, 2, 3), dtype=np.uint8)
        arr[..., 0] = 255  # pure red
        path = tmp_path / "rgb.png"
        Image.fromarray(arr).save(path)
        buf = load_image(path)
        assert np.allclose(buf.data, 0.299, atol=1e-6)

    def test_tiff_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        buf = ImageBuffer.from_array(np.round(rng.random((8, 8)) * 255) / 255)
        path = tmp_path / "img.tiff"
        save_image(buf, path)
        assert np.allclose(load_image(path).data, buf.data, atol=1e-9)

    def test_garbage_file(self, tmp_path):
        path = tmp_path / "bad.png"
        path.write_bytes(b"not an image")
        with pytest.raises(FormatError):
            load_image(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_image(tmp_path / "nope.png")
