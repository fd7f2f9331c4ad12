"""Single-channel raster container and image ingestion.

Intensities live in [0, 1]. Files are 8- or 16-bit grayscale or RGB PNG/TIFF;
integer samples are scaled by the dtype maximum on load.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DimensionError, FormatError, InputError

# BT.601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass
class ImageBuffer:
    width: int
    height: int
    data: np.ndarray  # shape (height, width), float64 in [0, 1]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InputError("image dimensions must be >= 1")
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.shape != (self.height, self.width):
            raise DimensionError(
                f"data shape {self.data.shape} != (height, width) = "
                f"({self.height}, {self.width})"
            )
        if not np.all(np.isfinite(self.data)):
            raise InputError("image contains non-finite values")
        if self.data.min() < 0.0 or self.data.max() > 1.0:
            raise InputError("image intensities must lie in [0, 1]")

    @classmethod
    def from_array(cls, arr) -> "ImageBuffer":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionError(f"expected a 2D array, got shape {arr.shape}")
        return cls(width=arr.shape[1], height=arr.shape[0], data=arr)

    @property
    def dims(self) -> tuple[int, int]:
        """(width, height) in pixels."""
        return (self.width, self.height)

    @property
    def area(self) -> int:
        return self.width * self.height


def to_grayscale(rgb_image) -> ImageBuffer:
    """Collapse an (h, w, 3) raster in [0, 1] to BT.601 luma."""
    rgb = np.asarray(rgb_image, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionError(f"expected (h, w, 3) channels, got shape {rgb.shape}")
    if not np.all(np.isfinite(rgb)) or rgb.min() < 0.0 or rgb.max() > 1.0:
        raise InputError("channel values must be finite and in [0, 1]")
    gray = rgb @ _LUMA
    return ImageBuffer.from_array(np.clip(gray, 0.0, 1.0))


def load_image(path) -> ImageBuffer:
    """Load a grayscale or RGB PNG/TIFF, scaling integers to [0, 1]."""
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise
    except Exception as exc:  # Pillow raises a mix of OSError subclasses
        raise FormatError(f"cannot read image {path}: {exc}") from exc

    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        scale = 255.0
    elif arr.dtype == np.uint16:
        scale = 65535.0
    elif arr.dtype == np.int32 and img.mode == "I":
        # Pillow promotes some 16-bit rasters to mode "I".
        scale = 65535.0
    else:
        raise FormatError(f"unsupported sample type {arr.dtype} in {path}")

    data = arr.astype(np.float64) / scale
    if data.ndim == 2:
        return ImageBuffer.from_array(np.clip(data, 0.0, 1.0))
    if data.ndim == 3 and data.shape[2] in (3, 4):
        return to_grayscale(np.clip(data[:, :, :3], 0.0, 1.0))
    raise FormatError(f"unsupported channel layout {arr.shape} in {path}")


def save_image(image: ImageBuffer, path) -> None:
    """Write an 8-bit grayscale PNG/TIFF (format chosen from the extension)."""
    arr = np.clip(np.round(image.data * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)
