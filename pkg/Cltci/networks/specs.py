from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Optional


class EncoderVariant(str, Enum):
    UNET_ENCODER = 'unet-encoder'
    TINY_CNN = 'tiny-cnn'


DEFAULT_STAGE_CHANNELS = {
    EncoderVariant.UNET_ENCODER: (64, 128, 256, 512),
    EncoderVariant.TINY_CNN: (8, 16, 32, 64),
}

FAN_IN_UNIFORM = 'fan-in-uniform'


@dataclass(frozen=True)
class EncoderSpec:
    """
    Encoder topology. Each stage after the first halves the resolution;
    `feature_dim` is the width of the last stage.
    """

    variant: EncoderVariant = EncoderVariant.UNET_ENCODER
    input_size: int = 256
    stage_channels: Optional[tuple[int, ...]] = None
    in_channels: int = 1

    def __post_init__(self):
        variant = EncoderVariant(self.variant)
        object.__setattr__(self, 'variant', variant)
        channels = self.stage_channels
        if channels is None:
            channels = DEFAULT_STAGE_CHANNELS[variant]
        channels = tuple(int(width) for width in channels)
        object.__setattr__(self, 'stage_channels', channels)
        if len(channels) < 2:
            raise ValueError("An encoder needs at least 2 stages")
        if any(width < 1 for width in channels):
            raise ValueError(f"Stage widths must be positive, got {channels}")
        factor = 2 ** (len(channels) - 1)
        if self.input_size < factor or self.input_size % factor:
            raise ValueError(
                f"input_size {self.input_size} must be divisible by {factor} "
                f"for {len(channels)} stages"
            )

    @property
    def feature_dim(self) -> int:
        return self.stage_channels[-1]

    @property
    def num_stages(self) -> int:
        return len(self.stage_channels)

    def stage_sizes(self) -> list[int]:
        return [self.input_size // 2 ** stage for stage in range(self.num_stages)]

    def to_dict(self) -> dict:
        values = asdict(self)
        values['variant'] = self.variant.value
        values['stage_channels'] = list(self.stage_channels)
        return values

    @classmethod
    def from_dict(cls, values: dict) -> 'EncoderSpec':
        return cls(**values)


@dataclass(frozen=True)
class ProjectionSpec:
    """Two-layer MLP head; hidden width defaults to the encoder feature width."""

    hidden_dim: Optional[int] = None
    output_dim: int = 128

    def __post_init__(self):
        if self.hidden_dim is not None and self.hidden_dim < 1:
            raise ValueError("hidden_dim must be positive")
        if self.output_dim < 1:
            raise ValueError("output_dim must be positive")

    def hidden_for(self, feature_dim: int) -> int:
        return self.hidden_dim or feature_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> 'ProjectionSpec':
        return cls(**values)
