import torch
from torch import nn

from pg2.core.config import DConfig
from pg2.core.errors import ShapeError
from pg2.nets.blocks import init_weights


class PairDiscriminator(nn.Module):
    """DCGAN-style discriminator over (condition, candidate) pairs.

    Stride-2 4x4 convs with leaky-relu, widths doubling from base_filters,
    then a linear head sized to the input resolution and a sigmoid.
    """

    def __init__(self, cfg: DConfig, image_height: int, image_width: int):
        super().__init__()
        self.cfg = cfg
        self.image_height = image_height
        self.image_width = image_width

        factor = 2**cfg.num_layers
        if image_height % factor or image_width % factor:
            raise ShapeError(f"{image_height}x{image_width} not divisible by {factor}")

        layers = []
        channels, width = cfg.input_channels, cfg.base_filters
        for _ in range(cfg.num_layers):
            layers += [nn.Conv2d(channels, width, kernel_size=4, stride=2, padding=1), nn.LeakyReLU(cfg.leaky_slope)]
            channels, width = width, width * 2
        self.features = nn.Sequential(*layers)
        self.head = nn.Linear(channels * (image_height // factor) * (image_width // factor), 1)

    def forward(self, condition: torch.Tensor, candidate: torch.Tensor) -> torch.Tensor:
        """Probability per pair that the candidate is the real target, shape (B,)"""
        expected = (3, self.image_height, self.image_width)
        if condition.shape != candidate.shape or tuple(condition.shape[1:]) != expected:
            raise ShapeError(
                f"pair must be two (B, {', '.join(map(str, expected))}) tensors, "
                f"got {tuple(condition.shape)} and {tuple(candidate.shape)}"
            )
        x = self.features(torch.cat([condition, candidate], dim=1))
        return torch.sigmoid(self.head(x.flatten(1))).squeeze(1)


def build_discriminator(cfg: DConfig, image_height: int, image_width: int) -> PairDiscriminator:
    net = PairDiscriminator(cfg, image_height, image_width)
    init_weights(net, cfg.init_std)
    return net
