"""Hybrid-siamese encoder with the correlation metric head.

Two pseudo-siamese stems (identical layout, unshared weights) lift SAR and
optical patches into a common space; a literally shared trunk produces the
high-level feature map; a shared projection block phi yields unit-norm local
embeddings whose correlations with the fixed equiangular basis aggregate into
one patch descriptor. Block widths are modest so CPU training stays viable;
the architecture is patch-size agnostic (any multiple of 16).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .losses import correlation_coeffs, eubv_basis, safe_normalize


@dataclass
class EncoderSpec:
    n_a: int = 16          # basis vectors; embedding dim equals this
    stem_channels: int = 16
    trunk_channels: int = 48
    tau_a: float = 0.1

    @property
    def c_v(self) -> int:
        return self.n_a


class ResBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(channels)

    def forward(self, x):
        y = torch.relu(self.bn1(self.conv1(x)))
        y = self.bn2(self.conv2(y))
        return torch.relu(x + y)


def _down(cin, cout):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=2, padding=1, bias=False),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


def _stem(spec: EncoderSpec) -> nn.Sequential:
    c = spec.stem_channels
    return nn.Sequential(_down(1, c), ResBlock(c))


class HybridSiameseEncoder(nn.Module):
    """Pseudo-siamese stems (per modality) feeding one shared trunk."""

    def __init__(self, spec: EncoderSpec):
        super().__init__()
        self.en_sar = _stem(spec)
        self.en_opt = _stem(spec)
        c, t = spec.stem_channels, spec.trunk_channels
        self.en_shared = nn.Sequential(_down(c, 2 * c), ResBlock(2 * c), _down(2 * c, t), ResBlock(t))

    def forward(self, x: torch.Tensor, modality: str) -> torch.Tensor:
        stem = self.en_sar if modality == "sar" else self.en_opt
        return self.en_shared(stem(x))


class CorrelationMetricHead(nn.Module):
    """Projection phi to local embeddings plus the EUBV descriptor head."""

    def __init__(self, spec: EncoderSpec):
        super().__init__()
        t = spec.trunk_channels
        self.phi = nn.Sequential(
            nn.Conv2d(t, t, 3, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(t),
            nn.ReLU(inplace=True),
            nn.Conv2d(t, spec.c_v, 3, padding=1),
        )
        self.tau_a = spec.tau_a

    def embed(self, feature_map: torch.Tensor) -> torch.Tensor:
        """(B, C_F, H, W) -> (B, H_E*W_E, C_V) unit-norm local embeddings."""
        e = self.phi(feature_map)
        b, c, h, w = e.shape
        return safe_normalize(e.permute(0, 2, 3, 1).reshape(b, h * w, c))

    def descriptor(self, embeddings: torch.Tensor, basis: torch.Tensor) -> torch.Tensor:
        """(B, N, C_V) embeddings -> (B, C_V) unit patch descriptors."""
        a = correlation_coeffs(embeddings, basis, self.tau_a)
        g = a.mean(dim=1)
        return safe_normalize(g @ basis)


class DescriptorNet(nn.Module):
    def __init__(self, spec: EncoderSpec | None = None):
        super().__init__()
        self.spec = spec if spec is not None else EncoderSpec()
        self.encoder = HybridSiameseEncoder(self.spec)
        self.head = CorrelationMetricHead(self.spec)
        self.register_buffer("basis", eubv_basis(self.spec.n_a))

    def features(self, x: torch.Tensor, modality: str) -> torch.Tensor:
        return self.encoder(x, modality)

    def embed(self, feature_map: torch.Tensor) -> torch.Tensor:
        return self.head.embed(feature_map)

    def descriptors(self, x: torch.Tensor, modality: str) -> torch.Tensor:
        """Patch batch (B, 1, H, W) -> unit descriptors (B, C_V)."""
        e = self.embed(self.features(x, modality))
        return self.head.descriptor(e, self.basis)
