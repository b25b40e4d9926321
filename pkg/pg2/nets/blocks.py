from typing import List, Tuple

import torch
from torch import nn


def conv3x3(in_channels: int, out_channels: int, stride: int = 1) -> nn.Conv2d:
    return nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=stride, padding=1)


def init_weights(module: nn.Module, std: float = 0.02) -> None:
    """Zero-mean Gaussian weights, zero biases"""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


class ResidualBlock(nn.Module):
    """Two stride-1 conv-relu layers around an identity shortcut"""

    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            conv3x3(channels, channels),
            nn.ReLU(),
            conv3x3(channels, channels),
            nn.ReLU(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


class ResidualEncoder(nn.Module):
    """Stem conv, then N residual blocks; block b has b * base_filters channels.

    Every block but the last is followed by a stride-2 conv that halves the
    resolution and widens to the next block.
    """

    def __init__(self, in_channels: int, num_blocks: int, base_filters: int):
        super().__init__()
        self.num_blocks = num_blocks
        self.base_filters = base_filters
        self.stem = nn.Sequential(conv3x3(in_channels, base_filters), nn.ReLU())
        self.blocks = nn.ModuleList(ResidualBlock(b * base_filters) for b in range(1, num_blocks + 1))
        self.downsample = nn.ModuleList(
            nn.Sequential(conv3x3(b * base_filters, (b + 1) * base_filters, stride=2), nn.ReLU())
            for b in range(1, num_blocks)
        )

    @property
    def out_channels(self) -> int:
        return self.num_blocks * self.base_filters

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, List[torch.Tensor]]:
        skips = []
        x = self.stem(x)
        for b, block in enumerate(self.blocks):
            x = block(x)
            skips.append(x)
            if b < self.num_blocks - 1:
                x = self.downsample[b](x)
        return x, skips


class ResidualDecoder(nn.Module):
    """Mirror of ResidualEncoder.

    At level b (N down to 1) the input is concatenated with encoder block b's
    output, passed through a residual block, then upsampled and narrowed to
    (b - 1) * base_filters channels. Level 1 ends in a 3-channel conv with no
    activation.
    """

    def __init__(self, in_channels: int, num_blocks: int, base_filters: int, out_channels: int = 3):
        super().__init__()
        self.num_blocks = num_blocks
        self.blocks = nn.ModuleList()
        self.upsample = nn.ModuleList()
        channels = in_channels
        for b in range(num_blocks, 0, -1):
            merged = channels + b * base_filters
            self.blocks.append(ResidualBlock(merged))
            if b > 1:
                self.upsample.append(
                    nn.Sequential(
                        nn.Upsample(scale_factor=2, mode="nearest"),
                        conv3x3(merged, (b - 1) * base_filters),
                        nn.ReLU(),
                    )
                )
                channels = (b - 1) * base_filters
            else:
                channels = merged
        self.output = conv3x3(channels, out_channels)

    def forward(self, x: torch.Tensor, skips: List[torch.Tensor], use_skips: bool = True) -> torch.Tensor:
        for i, block in enumerate(self.blocks):
            skip = skips[self.num_blocks - 1 - i]
            if not use_skips:
                skip = torch.zeros_like(skip)
            x = block(torch.cat([x, skip], dim=1))
            if i < self.num_blocks - 1:
                x = self.upsample[i](x)
        return self.output(x)
