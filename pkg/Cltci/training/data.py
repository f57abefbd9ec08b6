"""
Per-step pretraining batches.

Step `s` of epoch `e` is drawn from generators seeded with (seed, e, s), so
a batch does not depend on which worker builds it or on earlier steps. This
keeps multi-worker loading and resumed runs identical to a single-threaded
run from scratch. Batch selection and view augmentation use separate
streams: the sampler seed picks the images, the augment seed draws the
views, and either falls back to the stage seed when unset.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from Cltci.augmentation.transforms import AugmentConfig, TwoViewTransform
from Cltci.datasets.bank import ImageBank
from Cltci.datasets.sampling import SamplerConfig, sample_batch

SAMPLER_STREAM = 0
AUGMENT_STREAM = 1


def step_rng(seed: int, epoch: int, step: int, stream: int = SAMPLER_STREAM) -> np.random.Generator:
    return np.random.default_rng([seed, epoch, step, stream])


def _seed_or(value: Optional[int], fallback: int) -> int:
    return fallback if value is None else value


class PretrainStepDataset(Dataset):
    """
    Item `step` is one batch of interleaved views: views[2i] and
    views[2i + 1] are the two augmentations of image i.
    """

    def __init__(self, bank: ImageBank, sampler: SamplerConfig, augment: AugmentConfig,
                 seed: int, epoch: int, steps: int):
        self.bank = bank
        self.sampler = sampler
        self.two_views = TwoViewTransform(augment)
        self.sampler_seed = _seed_or(sampler.seed, seed)
        self.augment_seed = _seed_or(augment.seed, seed)
        self.epoch = epoch
        self.steps = steps

    def __len__(self):
        return self.steps

    def __getitem__(self, step):
        records = sample_batch(
            self.bank.manifest, self.sampler, step_rng(self.sampler_seed, self.epoch, step, SAMPLER_STREAM)
        )
        view_rng = step_rng(self.augment_seed, self.epoch, step, AUGMENT_STREAM)
        views = []
        for record in records:
            views.extend(self.two_views(self.bank.image(record.image_id), view_rng))
        return {
            'step': step,
            'views': torch.from_numpy(np.stack(views)[:, None]),
            'patient_ids': [record.patient_id for record in records],
            'image_ids': [record.image_id for record in records],
        }


def step_loader(dataset: PretrainStepDataset, num_workers: int = 0) -> DataLoader:
    return DataLoader(dataset, batch_size=None, shuffle=False, num_workers=num_workers)
