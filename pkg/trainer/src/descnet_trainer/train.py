"""Training loop: consistency losses on warped feature maps plus contrastive.

Each batch draws one axis-aligned warp per sample; the SAR input is the
warped speckled patch, so warping the optical feature map by the same element
(and the SAR map by its inverse) produces the aligned embedding sets the
consistency losses compare.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .data import apply_d4, invert_d4, make_pairs
from .losses import contrastive_loss, cross_loss, joint_loss
from .model import EncoderSpec, DescriptorNet


class TrainingDiverged(RuntimeError):
    """Loss went non-finite; the last checkpoint path is attached."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


@dataclass
class TrainConfig:
    batch_size: int = 512
    lr: float = 2.5e-4
    epochs: int = 10
    n_pairs: int = 512
    patch: int = 128
    augment: bool = True
    tau_a: float = 0.1
    tau_b: float = 0.05
    tau_b_j: float = 0.05
    tau_c: float = 0.1
    alpha: float = 0.1
    seed: int = 0
    checkpoint_dir: str | None = None
    encoder: EncoderSpec = field(default_factory=EncoderSpec)

    def __post_init__(self):
        if min(self.batch_size, self.epochs, self.n_pairs, self.patch) < 1 or self.lr <= 0:
            raise ValueError("hyperparameters must be positive")


def batch_loss(model: DescriptorNet, sar, opt, codes, cfg: TrainConfig) -> torch.Tensor:
    """Total loss for one batch of co-registered (sar, opt) patches.

    `codes` holds the per-sample warp already applied to the SAR input; the
    same warp links the two feature maps.
    """
    f_sar = model.features(sar, "sar")
    f_opt = model.features(opt, "opt")

    f_opt_w = torch.stack([apply_d4(f, int(c)) for f, c in zip(f_opt, codes)])
    f_sar_w = torch.stack([invert_d4(f, int(c)) for f, c in zip(f_sar, codes)])

    flat = lambda e: e.reshape(-1, e.shape[-1])
    e_sar = flat(model.embed(f_sar))
    e_opt = flat(model.embed(f_opt))
    e_opt_w = flat(model.embed(f_opt_w))
    e_sar_w = flat(model.embed(f_sar_w))

    g_s = model.head.descriptor(model.embed(f_sar), model.basis)
    g_o = model.head.descriptor(model.embed(f_opt), model.basis)

    v = model.basis
    return (
        cross_loss(e_sar, e_opt_w, e_sar_w, e_opt, v, cfg.tau_a, cfg.tau_b)
        + joint_loss(e_sar, e_opt_w, e_sar_w, e_opt, v, cfg.tau_a, cfg.tau_b_j)
        + contrastive_loss(g_s, g_o, cfg.tau_c, cfg.alpha)
    )


def save_checkpoint(model: DescriptorNet, cfg: TrainConfig, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"model": model.state_dict(), "spec": model.spec}, path)


def load_checkpoint(path) -> DescriptorNet:
    blob = torch.load(path, weights_only=False)
    model = DescriptorNet(blob["spec"])
    model.load_state_dict(blob["model"])
    model.eval()
    return model


def train(cfg: TrainConfig) -> tuple[DescriptorNet, list[float]]:
    """Optimize the network on synthetic pairs; returns per-epoch mean losses."""
    torch.manual_seed(cfg.seed)
    model = DescriptorNet(cfg.encoder)
    sar_all, opt_all = make_pairs(cfg.n_pairs, patch=cfg.patch, seed=cfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    gen = torch.Generator().manual_seed(cfg.seed)

    history = []
    ckpt_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    last_ckpt = None
    for epoch in range(cfg.epochs):
        model.train()
        order = torch.randperm(cfg.n_pairs, generator=gen)
        epoch_losses = []
        for start in range(0, cfg.n_pairs, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            opt = opt_all[idx]
            sar = sar_all[idx]
            if cfg.augment:
                codes = torch.randint(0, 8, (len(idx),), generator=gen)
            else:
                codes = torch.zeros(len(idx), dtype=torch.long)
            sar = torch.stack([apply_d4(s, int(c)) for s, c in zip(sar, codes)])

            optimizer.zero_grad()
            loss = batch_loss(model, sar, opt, codes, cfg)
            if not torch.isfinite(loss):
                ckpt = (ckpt_dir / "diverged.pt") if ckpt_dir else None
                if ckpt is not None:
                    save_checkpoint(model, cfg, ckpt)
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}", checkpoint=ckpt
                )
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
        history.append(sum(epoch_losses) / len(epoch_losses))
        if ckpt_dir is not None:
            last_ckpt = ckpt_dir / f"epoch{epoch:04d}.pt"
            save_checkpoint(model, cfg, last_ckpt)
    if ckpt_dir is not None:
        save_checkpoint(model, cfg, ckpt_dir / "final.pt")
    model.eval()
    return model, history


def worker_threads() -> int:
    try:
        return max(1, int(os.environ.get("GRIDREG_THREADS", "0")) or torch.get_num_threads())
    except ValueError:
        return torch.get_num_threads()
