import logging
from typing import Tuple

import torch
from torch import nn

from pg2.core.config import G1Config, G2Config, PoseEmbedding
from pg2.core.errors import ConfigError, ShapeError
from pg2.models.pose import NUM_KEYPOINTS
from pg2.nets.blocks import ResidualDecoder, ResidualEncoder, init_weights

logger = logging.getLogger(__name__)


def _check_image(name: str, image: torch.Tensor, height: int, width: int) -> None:
    if image.dim() != 4 or image.shape[1] != 3 or tuple(image.shape[2:]) != (height, width):
        raise ShapeError(f"{name} must be (B, 3, {height}, {width}), got {tuple(image.shape)}")


class PoseGenerator(nn.Module):
    """Stage-I generator: residual U-Net with a fully-connected bottleneck.

    The pose enters according to cfg.embedding_mode:
      heatmap-concat  18 heatmaps concatenated to the image before the first block
      CE              36 raw coordinates through two FC layers, joined at the bottleneck
      HME             heatmaps through an independent encoder, joined at the bottleneck
    """

    def __init__(self, cfg: G1Config):
        super().__init__()
        self.cfg = cfg
        n, bf = cfg.num_blocks, cfg.base_filters
        flat = n * bf * cfg.bottom_height * cfg.bottom_width

        self.encoder = ResidualEncoder(cfg.input_channels, n, bf)
        self.fc_in = nn.Linear(flat, cfg.bottleneck_dim)

        pose_dim = 0
        if cfg.embedding_mode == PoseEmbedding.CE:
            self.pose_embed = nn.Sequential(
                nn.Linear(2 * NUM_KEYPOINTS, cfg.coord_hidden_dim),
                nn.ReLU(),
                nn.Linear(cfg.coord_hidden_dim, cfg.pose_feature_dim),
            )
            pose_dim = cfg.pose_feature_dim
        elif cfg.embedding_mode == PoseEmbedding.HME:
            self.pose_encoder = ResidualEncoder(NUM_KEYPOINTS, n, bf)
            self.pose_fc = nn.Linear(flat, cfg.pose_feature_dim)
            pose_dim = cfg.pose_feature_dim

        self.fc_out = nn.Linear(cfg.bottleneck_dim + pose_dim, bf * cfg.bottom_height * cfg.bottom_width)
        self.decoder = ResidualDecoder(bf, n, bf)

    def _check_inputs(self, image: torch.Tensor, pose: torch.Tensor) -> None:
        cfg = self.cfg
        _check_image("image", image, cfg.image_height, cfg.image_width)
        if cfg.embedding_mode == PoseEmbedding.CE:
            expected = (image.shape[0], 2 * NUM_KEYPOINTS)
        else:
            expected = (image.shape[0], NUM_KEYPOINTS, cfg.image_height, cfg.image_width)
        if tuple(pose.shape) != expected:
            raise ShapeError(f"pose for {cfg.embedding_mode.value} must be {expected}, got {tuple(pose.shape)}")

    def forward(self, image: torch.Tensor, pose: torch.Tensor, skip_connections: bool = True) -> torch.Tensor:
        """image (B,3,H,W) in [-1,1]; pose (B,18,H,W) heatmaps, or (B,36) coordinates for CE"""
        self._check_inputs(image, pose)
        cfg = self.cfg

        x = torch.cat([image, pose], dim=1) if cfg.embedding_mode == PoseEmbedding.HEATMAP else image
        x, skips = self.encoder(x)
        z = self.fc_in(x.flatten(1))

        if cfg.embedding_mode == PoseEmbedding.CE:
            z = torch.cat([z, self.pose_embed(pose)], dim=1)
        elif cfg.embedding_mode == PoseEmbedding.HME:
            pose_features, _ = self.pose_encoder(pose)
            z = torch.cat([z, self.pose_fc(pose_features.flatten(1))], dim=1)

        x = self.fc_out(z).view(-1, cfg.base_filters, cfg.bottom_height, cfg.bottom_width)
        return torch.tanh(self.decoder(x, skips, use_skips=skip_connections))


class RefinementGenerator(nn.Module):
    """Stage-II generator: fully-convolutional residual U-Net producing a difference map"""

    def __init__(self, cfg: G2Config):
        super().__init__()
        if cfg.num_blocks is None or cfg.num_blocks < 1:
            raise ConfigError(f"G2 depth {cfg.num_blocks} is not usable; build from RunConfig.resolved_g2()")
        self.cfg = cfg
        self.encoder = ResidualEncoder(cfg.input_channels, cfg.num_blocks, cfg.base_filters)
        self.decoder = ResidualDecoder(self.encoder.out_channels, cfg.num_blocks, cfg.base_filters)

    def forward(self, condition: torch.Tensor, coarse: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Returns (diff, refined) with refined = clamp(coarse + diff, -1, 1)"""
        if condition.shape != coarse.shape:
            raise ShapeError(f"condition {tuple(condition.shape)} and coarse {tuple(coarse.shape)} differ")
        factor = 2 ** (self.cfg.num_blocks - 1)
        _check_image("condition", condition, condition.shape[2], condition.shape[3])
        if condition.shape[2] % factor or condition.shape[3] % factor:
            raise ShapeError(f"image dims must be divisible by {factor}, got {tuple(condition.shape[2:])}")

        features, skips = self.encoder(torch.cat([condition, coarse], dim=1))
        diff = torch.tanh(self.decoder(features, skips))
        return diff, combine_difference(coarse, diff)


def combine_difference(coarse: torch.Tensor, diff: torch.Tensor) -> torch.Tensor:
    return torch.clamp(coarse + diff, -1.0, 1.0)


def build_g1(cfg: G1Config) -> PoseGenerator:
    net = PoseGenerator(cfg)
    init_weights(net, cfg.init_std)
    return net


def build_g2(cfg: G2Config) -> RefinementGenerator:
    net = RefinementGenerator(cfg)
    init_weights(net, cfg.init_std)
    return net
