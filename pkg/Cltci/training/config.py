from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from Cltci.augmentation.transforms import AugmentConfig
from Cltci.contrastive.losses import LossConfig
from Cltci.datasets.sampling import SamplerConfig
from Cltci.moco.queue import MoCoConfig
from Cltci.networks.specs import EncoderSpec, ProjectionSpec


class PretrainVariant(str, Enum):
    CL_TCI_SIMCLR = 'cl-tci-simclr'
    CL_TCI_MOCO = 'cl-tci-moco'
    SIMCLR_BASELINE = 'simclr-baseline'
    MOCO_BASELINE = 'moco-baseline'

    @property
    def is_moco(self) -> bool:
        return self in (PretrainVariant.CL_TCI_MOCO, PretrainVariant.MOCO_BASELINE)

    @property
    def is_baseline(self) -> bool:
        return self in (PretrainVariant.SIMCLR_BASELINE, PretrainVariant.MOCO_BASELINE)


@dataclass(frozen=True)
class PretrainConfig:
    """
    Pretraining run. Baseline variants use one image per patient and
    sibling-only positives whatever the batch settings say.
    """

    variant: PretrainVariant = PretrainVariant.CL_TCI_SIMCLR
    epochs: int = 500
    base_lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    steps_per_epoch: Optional[int] = None
    batch: SamplerConfig = field(default_factory=SamplerConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    moco: MoCoConfig = field(default_factory=MoCoConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig.pretraining)
    encoder: EncoderSpec = field(default_factory=EncoderSpec)
    projection: ProjectionSpec = field(default_factory=ProjectionSpec)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'variant', PretrainVariant(self.variant))
        if self.epochs < 1:
            raise ValueError(f"epochs must be positive, got {self.epochs}")
        if self.base_lr <= 0:
            raise ValueError(f"base_lr must be positive, got {self.base_lr}")
        if self.steps_per_epoch is not None and self.steps_per_epoch < 1:
            raise ValueError("steps_per_epoch must be positive")
        if self.variant.is_moco and self.moco.queue_capacity < self.sampler.batch_views:
            raise ValueError(
                f"queue_capacity {self.moco.queue_capacity} is smaller than the "
                f"{self.sampler.batch_views} keys enqueued per step"
            )

    @property
    def match_patients(self) -> bool:
        return not self.variant.is_baseline

    @property
    def sampler(self) -> SamplerConfig:
        """Effective batch settings (K forced to 1 for baselines)."""
        if self.variant.is_baseline:
            return replace(self.batch, images_per_patient=1)
        return self.batch

    def steps_for(self, num_images: int) -> int:
        if self.steps_per_epoch is not None:
            return self.steps_per_epoch
        return max(1, num_images // self.sampler.batch_images)


@dataclass(frozen=True)
class FinetuneConfig:
    """
    Supervised fine-tuning. `budgets` lists the annotation budgets M to
    sweep; None means the full training fold.
    """

    epochs: int = 200
    batch_size: int = 10
    lr: float = 5e-5
    weight_decay: float = 0.0
    budgets: tuple[Optional[int], ...] = (None,)
    folds: int = 5
    augment: AugmentConfig = field(default_factory=AugmentConfig.finetuning)
    encoder: EncoderSpec = field(default_factory=EncoderSpec)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.folds < 2:
            raise ValueError(f"folds must be at least 2, got {self.folds}")
        budgets = tuple(self.budgets) or (None,)
        if any(budget is not None and budget < 1 for budget in budgets):
            raise ValueError(f"Annotation budgets must be positive, got {budgets}")
        object.__setattr__(self, 'budgets', budgets)
