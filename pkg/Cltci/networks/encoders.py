"""
Convolutional encoder, projection head and the pretraining network.

The encoder has the contracting-path topology of a U-Net: a conv block per
stage with 2x max-pooling between stages. GroupNorm keeps outputs
independent of the batch composition, so train and eval modes agree.
"""
from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from .specs import EncoderSpec, ProjectionSpec


def _groups(channels: int) -> int:
    return math.gcd(8, channels)


class ConvBlock(nn.Sequential):
    """(3x3 conv, GroupNorm, ReLU) twice."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__(
            nn.Conv2d(in_channels, out_channels, 3, padding=1),
            nn.GroupNorm(_groups(out_channels), out_channels),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_channels, out_channels, 3, padding=1),
            nn.GroupNorm(_groups(out_channels), out_channels),
            nn.ReLU(inplace=True),
        )


class Encoder(nn.Module):
    def __init__(self, spec: EncoderSpec):
        super().__init__()
        self.spec = spec
        stages = []
        previous = spec.in_channels
        for index, width in enumerate(spec.stage_channels):
            block = ConvBlock(previous, width)
            stages.append(block if index == 0 else nn.Sequential(nn.MaxPool2d(2), block))
            previous = width
        self.stages = nn.ModuleList(stages)

    def forward(self, images: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        """Return (pooled features B x feature_dim, per-stage feature maps)."""
        expected = (self.spec.in_channels, self.spec.input_size, self.spec.input_size)
        if images.ndim != 4 or tuple(images.shape[1:]) != expected:
            raise ValueError(
                f"Encoder expects B x {expected[0]} x {expected[1]} x {expected[2]} input, "
                f"got {tuple(images.shape)}"
            )
        skips = []
        x = images
        for stage in self.stages:
            x = stage(x)
            skips.append(x)
        return x.mean(dim=(2, 3)), skips


class ProjectionHead(nn.Module):
    """Linear, ReLU, Linear; outputs are L2-normalized."""

    def __init__(self, feature_dim: int, spec: ProjectionSpec):
        super().__init__()
        hidden = spec.hidden_for(feature_dim)
        self.spec = spec
        self.layers = nn.Sequential(
            nn.Linear(feature_dim, hidden),
            nn.ReLU(inplace=True),
            nn.Linear(hidden, spec.output_dim),
        )

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return F.normalize(self.layers(features), dim=1)


class ContrastiveNet(nn.Module):
    """Encoder followed by the projection head used during pretraining."""

    def __init__(self, encoder_spec: EncoderSpec, projection_spec: ProjectionSpec, seed: int = 0):
        super().__init__()
        self.encoder = Encoder(encoder_spec)
        self.head = ProjectionHead(encoder_spec.feature_dim, projection_spec)
        fresh_init(self, seed)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        features, _ = self.encoder(images)
        return self.head(features)

    def features(self, images: torch.Tensor) -> torch.Tensor:
        return self.encoder(images)[0]


def encode(images: torch.Tensor, encoder: Encoder) -> tuple[torch.Tensor, list[torch.Tensor]]:
    return encoder(images)


def project(features: torch.Tensor, head: ProjectionHead) -> torch.Tensor:
    return head(features)


@torch.no_grad()
def fresh_init(module: nn.Module, seed: int) -> nn.Module:
    """
    Fan-in scaled uniform init: weights and biases of every conv and linear
    layer drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with a seeded
    generator. Norm layers reset to weight 1, bias 0.
    """
    generator = torch.Generator().manual_seed(int(seed))
    for layer in module.modules():
        if isinstance(layer, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            weight = layer.weight
            if isinstance(layer, nn.ConvTranspose2d):
                fan_in = weight.shape[0] * weight[0, 0].numel()
            else:
                fan_in = weight[0].numel()
            bound = 1.0 / math.sqrt(fan_in)
            weight.copy_(torch.rand(weight.shape, generator=generator) * 2 * bound - bound)
            if layer.bias is not None:
                layer.bias.copy_(torch.rand(layer.bias.shape, generator=generator) * 2 * bound - bound)
        elif isinstance(layer, nn.GroupNorm):
            nn.init.ones_(layer.weight)
            nn.init.zeros_(layer.bias)
    return module
