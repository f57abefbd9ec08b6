"""
Preprocessed images held in memory for the training loops.
"""
from __future__ import annotations

import logging
from typing import Iterable, Optional

import numpy as np
from torch.utils.data import DataLoader, Dataset

from .preprocessing import PreprocessConfig, load_pair
from .records import Manifest

logger = logging.getLogger(__name__)


class _PreprocessDataset(Dataset):
    def __init__(self, manifest: Manifest, cfg: PreprocessConfig):
        self.records = manifest.records
        self.cfg = cfg

    def __len__(self):
        return len(self.records)

    def __getitem__(self, index):
        record = self.records[index]
        image, mask = load_pair(record, self.cfg)
        return {'image_id': record.image_id, 'image': image, 'mask': mask}


class ImageBank:
    """
    image_id -> preprocessed float32 image (and uint8 mask when annotated).

    Built once per run; preprocessing may fan out over DataLoader workers.
    """

    def __init__(self, manifest: Manifest, cfg: PreprocessConfig, num_workers: int = 0):
        self.manifest = manifest
        self.cfg = cfg
        self.images: dict[str, np.ndarray] = {}
        self.masks: dict[str, np.ndarray] = {}
        loader = DataLoader(
            _PreprocessDataset(manifest, cfg), batch_size=None, shuffle=False,
            num_workers=num_workers,
        )
        for item in loader:
            self.images[item['image_id']] = np.asarray(item['image'], dtype=np.float32)
            if item['mask'] is not None:
                self.masks[item['image_id']] = np.asarray(item['mask'], dtype=np.uint8)
        logger.info(
            "Preprocessed %d images (%d masks) at %dpx",
            len(self.images), len(self.masks), cfg.target_size,
        )

    def __len__(self):
        return len(self.images)

    @property
    def size(self) -> int:
        return self.cfg.target_size

    def image(self, image_id: str) -> np.ndarray:
        return self.images[image_id]

    def mask(self, image_id: str) -> Optional[np.ndarray]:
        return self.masks.get(image_id)

    def stack_images(self, image_ids: Iterable[str]) -> np.ndarray:
        """N x 1 x S x S float32."""
        return np.stack([self.images[image_id] for image_id in image_ids])[:, None]

    def stack_masks(self, image_ids: Iterable[str]) -> np.ndarray:
        image_ids = list(image_ids)
        missing = [image_id for image_id in image_ids if image_id not in self.masks]
        if missing:
            raise ValueError(f"No mask for images: {missing}")
        return np.stack([self.masks[image_id] for image_id in image_ids])
