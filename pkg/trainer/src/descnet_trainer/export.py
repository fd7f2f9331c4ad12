"""Export learned descriptors as GRDS files readable by the gridreg engine."""

from __future__ import annotations

import numpy as np
import torch

from gridreg.descriptors import DescriptorSet, write_descriptor_file
from gridreg.grid import extract_patch, gridize
from gridreg.image import ImageBuffer

from .model import DescriptorNet


def image_descriptors(
    model: DescriptorNet,
    image: ImageBuffer,
    patch: int,
    step: int,
    modality: str = "opt",
    batch: int = 32,
) -> DescriptorSet:
    """One learned descriptor per grid point of `image`."""
    spec = gridize(image, patch, step)
    rows = []
    model.eval()
    with torch.no_grad():
        for start in range(0, spec.n_points, batch):
            stack = np.stack(
                [
                    extract_patch(image, spec, i)
                    for i in range(start, min(start + batch, spec.n_points))
                ]
            )
            x = torch.from_numpy(stack).float().unsqueeze(1)
            rows.append(model.descriptors(x, modality).cpu().numpy())
    data = np.concatenate(rows).astype(np.float32)
    return DescriptorSet(
        grid=spec, dim=data.shape[1], data=data, modality=modality
    )


def export_descriptors(
    model: DescriptorNet,
    image: ImageBuffer,
    patch: int,
    step: int,
    out_path,
    modality: str = "opt",
) -> DescriptorSet:
    dset = image_descriptors(model, image, patch, step, modality=modality)
    write_descriptor_file(dset, out_path)
    return dset
