"""
U-Net segmentation network built around the shared encoder.
"""
from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .encoders import ConvBlock, Encoder, fresh_init
from .specs import EncoderSpec

NUM_CLASSES = 3


class Decoder(nn.Module):
    """Expanding path: upsample, concatenate the skip, conv block."""

    def __init__(self, spec: EncoderSpec, num_classes: int):
        super().__init__()
        channels = spec.stage_channels
        self.ups = nn.ModuleList()
        self.blocks = nn.ModuleList()
        for deeper, shallower in zip(channels[:0:-1], channels[-2::-1]):
            self.ups.append(nn.ConvTranspose2d(deeper, shallower, 2, stride=2))
            self.blocks.append(ConvBlock(2 * shallower, shallower))
        self.classifier = nn.Conv2d(channels[0], num_classes, 1)

    def forward(self, skips: list[torch.Tensor]) -> torch.Tensor:
        x = skips[-1]
        for up, block, skip in zip(self.ups, self.blocks, skips[-2::-1]):
            x = block(torch.cat([skip, up(x)], dim=1))
        return self.classifier(x)


class SegmentationNet(nn.Module):
    def __init__(self, spec: EncoderSpec, num_classes: int = NUM_CLASSES):
        super().__init__()
        self.spec = spec
        self.num_classes = num_classes
        self.encoder = Encoder(spec)
        self.decoder = Decoder(spec, num_classes)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        """B x num_classes x S x S class scores."""
        _, skips = self.encoder(images)
        return self.decoder(skips)


def build_segmentation_net(spec: EncoderSpec, num_classes: int = NUM_CLASSES, seed: int = 0) -> SegmentationNet:
    if num_classes < 2:
        raise ValueError(f"num_classes must be at least 2, got {num_classes}")
    return fresh_init(SegmentationNet(spec, num_classes), seed)


@torch.no_grad()
def predict_masks(net: SegmentationNet, images: np.ndarray, batch_size: int = 16) -> np.ndarray:
    """N x 1 x S x S images to N x S x S uint8 label maps."""
    net.eval()
    predictions = []
    for start in range(0, len(images), batch_size):
        logits = net(torch.from_numpy(np.ascontiguousarray(images[start:start + batch_size])))
        predictions.append(logits.argmax(dim=1).to(torch.uint8).numpy())
    return np.concatenate(predictions)
