"""Searchable dual-path blocks and the toy embedding network.

Each block applies three searched operations in sequence; the output is
split into a fixed-width residual part (added back) and a growth part
(concatenated), so stacking blocks widens the feature map the way dual
path networks do: 48 -> 64 -> 80 -> 96 channels over three blocks.
"""
from __future__ import annotations

import torch
from torch import nn

OP_NAMES = (
    "BnConv1x1", "Conv1x1Bn", "Conv1x1",
    "BnConv3x3", "Conv3x3Bn", "Conv3x3",
    "BnConv5x5", "Conv5x5Bn", "Conv5x5",
)

RES_CHANNELS = 32
GROWTH = 16
MID_CHANNELS = 32
STEM_CHANNELS = RES_CHANNELS + GROWTH
N_BLOCKS = 3
EMBED_DIM = 64


def make_op(name: str, in_channels: int, out_channels: int) -> nn.Sequential:
    """One searched operation: a convolution with optional normalization
    before (Bn prefix) or after (Bn suffix) it."""
    if name not in OP_NAMES:
        raise ValueError(f"unknown op {name!r} (choose from {OP_NAMES})")
    kernel = next(k for k in (1, 3, 5) if f"{k}x{k}" in name)
    layers: list[nn.Module] = []
    if name.startswith("Bn"):
        layers.append(nn.BatchNorm2d(in_channels))
    layers.append(nn.Conv2d(in_channels, out_channels, kernel,
                            padding=kernel // 2, bias=not name.endswith("Bn")))
    if name.endswith("Bn"):
        layers.append(nn.BatchNorm2d(out_channels))
    return nn.Sequential(*layers)


class SearchableBlock(nn.Module):
    """Three searched ops; output feeds both the residual and dense paths.

    Input layout: [residual RES_CHANNELS | dense rest]. The block's last
    op emits RES_CHANNELS + GROWTH channels; the first slice is added to
    the residual part, the second is appended to the dense part.
    """

    def __init__(self, in_channels: int, op1: str, op2: str, op3: str):
        super().__init__()
        if in_channels < RES_CHANNELS:
            raise ValueError(
                f"block input must carry at least {RES_CHANNELS} channels")
        self.in_channels = in_channels
        self.out_channels = in_channels + GROWTH
        self.op1 = make_op(op1, in_channels, MID_CHANNELS)
        self.op2 = make_op(op2, MID_CHANNELS, MID_CHANNELS)
        self.op3 = make_op(op3, MID_CHANNELS, RES_CHANNELS + GROWTH)
        self.act = nn.ReLU(inplace=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.op3(self.act(self.op2(self.act(self.op1(x)))))
        residual = x[:, :RES_CHANNELS] + h[:, :RES_CHANNELS]
        dense = torch.cat([x[:, RES_CHANNELS:], h[:, RES_CHANNELS:]], dim=1)
        return torch.cat([residual, dense], dim=1)


class EmbeddingNet(nn.Module):
    """Stem -> three searchable blocks (downsampled between) -> embedding."""

    def __init__(self, ops: tuple[str, str, str], embed_dim: int = EMBED_DIM):
        super().__init__()
        ops = tuple(ops)
        if len(ops) != 3:
            raise ValueError(f"exactly three block operations required, got {ops!r}")
        self.stem = nn.Sequential(
            nn.Conv2d(3, STEM_CHANNELS, 3, padding=1, bias=False),
            nn.BatchNorm2d(STEM_CHANNELS),
            nn.ReLU(inplace=True),
        )
        blocks = []
        channels = STEM_CHANNELS
        for _ in range(N_BLOCKS):
            block = SearchableBlock(channels, *ops)
            blocks.append(block)
            channels = block.out_channels
        self.blocks = nn.ModuleList(blocks)
        self.pool = nn.AvgPool2d(2)
        self.head = nn.Sequential(
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(channels, embed_dim),
        )
        self.embed_dim = embed_dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.stem(x)
        for block in self.blocks:
            x = self.pool(block(x))
        return self.head(x)


def signature(module: nn.Module) -> tuple:
    """Structural fingerprint: layer class names with their shapes."""
    parts = []
    for name, m in module.named_modules():
        if isinstance(m, nn.Conv2d):
            parts.append((name, "conv", m.in_channels, m.out_channels,
                          m.kernel_size))
        elif isinstance(m, nn.BatchNorm2d):
            parts.append((name, "bn", m.num_features))
    return tuple(parts)


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
