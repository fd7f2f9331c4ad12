"""Trainer for the hybrid-siamese correlation metric network.

Learns patch descriptors with the equiangular-basis consistency losses plus a
margin contrastive loss, validates its loss values against the gridreg
reference implementation, and exports descriptors as GRDS files the
registration engine consumes.
"""

from .data import apply_d4, invert_d4, make_pairs
from .export import export_descriptors, image_descriptors
from .losses import (
    contrastive_loss,
    correlation_coeffs,
    cross_loss,
    eubv_basis,
    joint_loss,
    safe_normalize,
    total_loss,
)
from .model import CorrelationMetricHead, EncoderSpec, DescriptorNet, HybridSiameseEncoder
from .parity import loss_parity
from .train import (
    TrainConfig,
    TrainingDiverged,
    batch_loss,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
