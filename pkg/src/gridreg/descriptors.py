"""Per-grid-point descriptors and the GRDS descriptor file format.

The built-in baseline descriptor is classical: 16x16 block means, orientation
canonicalized over the eight axis-aligned rotations/flips so that patches match
across such warps, then z-scored (making it invariant to affine intensity
rescaling) and L2-normalized. It carries no cross-modality invariance; learned
descriptors arrive through GRDS files instead.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, FormatError, InputError
from .grid import GridSpec, extract_patch
from .image import ImageBuffer

BLOCKS = 16  # blocks per patch side; descriptor dim = BLOCKS**2
ZERO_STD_EPS = 1e-8

GRDS_MAGIC = b"GRDS"
GRDS_VERSION = 1
_HEADER = struct.Struct("<4sIIIIIIB3x")  # magic, version, n_w, n_h, dim, patch, step, normalized


@dataclass
class DescriptorSet:
    grid: GridSpec
    dim: int
    data: np.ndarray  # (n_points, dim) float32, unit rows or zero-fallback rows
    modality: str = "unknown"
    normalized: bool = True

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        n = self.grid.n_points
        if self.data.shape != (n, self.dim):
            raise ContractError(
                f"descriptor data shape {self.data.shape} != ({n}, {self.dim})"
            )
        if self.normalized:
            norms = np.linalg.norm(self.data.astype(np.float64), axis=1)
            bad = ~((np.abs(norms - 1.0) <= 1e-5) | (norms == 0.0))
            if np.any(bad):
                raise ContractError(
                    f"{int(bad.sum())} descriptor rows are neither unit nor zero-fallback"
                )


def _d4_variants(blocks: np.ndarray) -> list[np.ndarray]:
    """The eight rotation/flip images of (..., n, n) block matrices."""
    out = []
    for mat in (blocks, np.swapaxes(blocks, -2, -1)):
        for k in range(4):
            out.append(np.rot90(mat, k, axes=(-2, -1)))
    return out


def _orientation_template() -> np.ndarray:
    """Fixed matrix with no rotation/flip symmetry, used to rank orientations."""
    i = np.arange(BLOCKS, dtype=np.float64)
    return np.add.outer(i + 1.0, 1.6180339887498949 * (i + 1.0))


_TEMPLATE = _orientation_template()


def _canonical_blocks(blocks: np.ndarray) -> np.ndarray:
    """Rotate/flip each (n, 16, 16) block matrix into its canonical orientation.

    The eight orientations of a patch share one variant set, so picking the
    variant best correlated with a fixed asymmetric template yields the same
    descriptor for a patch and any of its axis-aligned rotations/flips.
    """
    variants = _d4_variants(blocks)
    scores = np.stack(
        [np.tensordot(v, _TEMPLATE, axes=([-2, -1], [0, 1])) for v in variants],
        axis=-1,
    )
    pick = np.argmax(scores, axis=-1)
    out = np.empty_like(blocks)
    for v in range(8):
        sel = pick == v
        if np.any(sel):
            out[sel] = variants[v][sel]
    return out


def _block_means(patch: np.ndarray) -> np.ndarray:
    side = patch.shape[0]
    bs = side // BLOCKS
    return patch.reshape(BLOCKS, bs, BLOCKS, bs).mean(axis=(1, 3))


def _finish(blocks_flat: np.ndarray) -> np.ndarray:
    """z-score then L2-normalize rows; constant rows map to zero-fallback."""
    mean = blocks_flat.mean(axis=-1, keepdims=True)
    std = blocks_flat.std(axis=-1, keepdims=True)
    ok = std[..., 0] >= ZERO_STD_EPS
    z = np.where(ok[..., None], (blocks_flat - mean) / np.where(ok[..., None], std, 1.0), 0.0)
    norm = np.linalg.norm(z, axis=-1, keepdims=True)
    return np.where(norm > 0.0, z / np.where(norm > 0.0, norm, 1.0), 0.0)


def baseline_descriptor(patch: np.ndarray) -> np.ndarray:
    """Descriptor of one square patch whose side is divisible by 16."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim != 2 or patch.shape[0] != patch.shape[1]:
        raise InputError(f"expected a square patch, got shape {patch.shape}")
    if patch.shape[0] % BLOCKS != 0:
        raise InputError(f"patch side {patch.shape[0]} not divisible by {BLOCKS}")
    blocks = _canonical_blocks(_block_means(patch)[None])
    return _finish(blocks.reshape(1, BLOCKS * BLOCKS))[0]


def _baseline_grid_fast(image: ImageBuffer, spec: GridSpec) -> np.ndarray:
    """All baseline descriptors at once when patch blocks align to a global tile grid."""
    bs = spec.patch // BLOCKS
    m = spec.step // bs
    n_ty = (image.height // bs) * bs
    n_tx = (image.width // bs) * bs
    tiles = image.data[:n_ty, :n_tx].reshape(n_ty // bs, bs, n_tx // bs, bs).mean(axis=(1, 3))
    s0, s1 = tiles.strides
    windows = np.lib.stride_tricks.as_strided(
        tiles,
        shape=(spec.n_h, spec.n_w, BLOCKS, BLOCKS),
        strides=(s0 * m, s1 * m, s0, s1),
    ).reshape(spec.n_points, BLOCKS, BLOCKS)
    blocks = _canonical_blocks(np.ascontiguousarray(windows))
    return _finish(blocks.reshape(spec.n_points, BLOCKS * BLOCKS))


def compute_descriptors(
    image: ImageBuffer,
    spec: GridSpec,
    provider=None,
    modality: str = "unknown",
) -> DescriptorSet:
    """One descriptor per grid point, rows L2-normalized.

    `provider` maps a patch raster to a fixed-dimension vector; None selects the
    baseline descriptor (with a vectorized path when block tiles align).
    """
    if provider is None:
        if spec.patch % BLOCKS != 0:
            raise InputError(f"baseline descriptor needs patch side divisible by {BLOCKS}")
        if spec.step % (spec.patch // BLOCKS) == 0:
            data = _baseline_grid_fast(image, spec)
        else:
            data = np.stack(
                [baseline_descriptor(extract_patch(image, spec, i)) for i in range(spec.n_points)]
            )
        return DescriptorSet(
            grid=spec, dim=BLOCKS * BLOCKS, data=data.astype(np.float32), modality=modality
        )

    rows = []
    dim = None
    for i in range(spec.n_points):
        vec = np.asarray(provider(extract_patch(image, spec, i)), dtype=np.float64).ravel()
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise ContractError(
                f"provider returned dim {vec.size} at grid point {i}, expected {dim}"
            )
        norm = np.linalg.norm(vec)
        rows.append(vec / norm if norm >= ZERO_STD_EPS else np.zeros_like(vec))
    data = np.stack(rows).astype(np.float32)
    return DescriptorSet(grid=spec, dim=dim, data=data, modality=modality)


def write_descriptor_file(dset: DescriptorSet, path) -> None:
    """Serialize to GRDS: 32-byte little-endian header + f32 payload."""
    header = _HEADER.pack(
        GRDS_MAGIC,
        GRDS_VERSION,
        dset.grid.n_w,
        dset.grid.n_h,
        dset.dim,
        dset.grid.patch,
        dset.grid.step,
        1 if dset.normalized else 0,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(dset.data, dtype="<f4").tobytes())


def read_descriptor_file(path, modality: str = "unknown") -> DescriptorSet:
    """Parse a GRDS file; byte-exact inverse of write_descriptor_file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError("file shorter than the GRDS header", offset=len(raw))
    magic, version, n_w, n_h, dim, patch, step, normalized = _HEADER.unpack_from(raw, 0)
    if magic != GRDS_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {GRDS_MAGIC!r}", offset=0)
    if version != GRDS_VERSION:
        raise FormatError(f"unsupported GRDS version {version}", offset=4)
    expected = n_h * n_w * dim * 4
    payload = raw[_HEADER.size :]
    if len(payload) < expected:
        raise FormatError(
            f"payload truncated: expected {expected} bytes, found {len(payload)}",
            offset=_HEADER.size + len(payload),
        )
    if len(payload) > expected:
        raise FormatError(
            f"trailing bytes: expected {expected} payload bytes, found {len(payload)}",
            offset=_HEADER.size + expected,
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(n_h * n_w, dim).copy()
    spec = GridSpec(patch=patch, step=step, n_w=n_w, n_h=n_h)
    return DescriptorSet(
        grid=spec,
        dim=dim,
        data=data,
        modality=modality,
        normalized=bool(normalized),
    )
