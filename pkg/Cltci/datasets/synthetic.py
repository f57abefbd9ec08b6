"""
Synthetic temporally-correlated chest-film stand-in.

Every patient gets a template: a torso ellipse with a patient-specific
texture and two non-overlapping lung ellipses. Each image of the patient is
the template under a small random affine jitter plus intensity noise, so
images of one patient resemble each other far more than images of two
different patients. Masks use labels 0 background, 1 left lung, 2 right
lung; the left lung is drawn on the image's right half (radiological view).
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from skimage import draw, filters

from Cltci.augmentation.transforms import AffineParams, apply_affine

from .preprocessing import read_image, write_png
from .records import ImageRecord, Manifest, write_manifest

logger = logging.getLogger(__name__)

BACKGROUND, LEFT_LUNG, RIGHT_LUNG = 0, 1, 2
MANIFEST_NAME = 'manifest.csv'


@dataclass(frozen=True)
class SyntheticConfig:
    num_patients: int = 8
    images_per_patient: int = 4
    image_size: int = 64
    patient_shape_seed: int = 0
    within_patient_jitter: float = 0.05
    across_patient_variation: float = 0.30
    min_images_per_patient: Optional[int] = None
    annotated_fraction: float = 1.0
    noise_std: float = 0.02

    def __post_init__(self):
        if self.num_patients < 1 or self.images_per_patient < 1:
            raise ValueError("num_patients and images_per_patient must be >= 1")
        if self.image_size < 16:
            raise ValueError("image_size must be at least 16 pixels")
        if not 0.0 <= self.within_patient_jitter < self.across_patient_variation <= 1.0:
            raise ValueError(
                "Need 0 <= within_patient_jitter < across_patient_variation <= 1"
            )
        minimum = self.min_images_per_patient
        if minimum is not None and not 1 <= minimum <= self.images_per_patient:
            raise ValueError("min_images_per_patient must lie in [1, images_per_patient]")
        if not 0.0 <= self.annotated_fraction <= 1.0:
            raise ValueError("annotated_fraction must be in [0, 1]")


def _patient_template(cfg: SyntheticConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Torso + texture image and the 3-class mask of one patient."""
    size = cfg.image_size
    v = cfg.across_patient_variation

    def vary(spread):
        return rng.uniform(-spread, spread)

    image = np.zeros((size, size), dtype=np.float64)
    mask = np.zeros((size, size), dtype=np.uint8)

    rows, cols = draw.ellipse(
        size * (0.50 + 0.05 * vary(v)), size * (0.50 + 0.05 * vary(v)),
        size * 0.46 * (1 + vary(v / 3)), size * 0.42 * (1 + vary(v / 3)),
        shape=image.shape,
    )
    image[rows, cols] = 0.60 + 0.3 * vary(v)

    texture = filters.gaussian(rng.standard_normal((size, size)), sigma=size / 16)
    texture /= max(np.abs(texture).max(), 1e-12)
    image[rows, cols] += 0.12 * texture[rows, cols]

    centre_row = size * (0.48 + 0.05 * vary(v))
    for label, centre_col in ((RIGHT_LUNG, 0.32), (LEFT_LUNG, 0.68)):
        rows, cols = draw.ellipse(
            centre_row + size * 0.03 * vary(v),
            size * (centre_col + 0.05 * vary(v)),
            size * 0.22 * (1 + vary(v / 2)),
            size * 0.11 * (1 + vary(v / 2)),
            shape=image.shape,
            rotation=0.5 * vary(v),
        )
        mask[rows, cols] = label
        image[rows, cols] = 0.25 + 0.2 * vary(v) + 0.08 * texture[rows, cols]
    return image, mask


def _jitter(cfg: SyntheticConfig, rng: np.random.Generator) -> AffineParams:
    j = cfg.within_patient_jitter
    size = cfg.image_size
    return AffineParams(
        rotation_degrees=float(rng.uniform(-60 * j, 60 * j)),
        translation=(
            float(rng.uniform(-0.2 * j, 0.2 * j) * size),
            float(rng.uniform(-0.2 * j, 0.2 * j) * size),
        ),
        scale=float(1 + rng.uniform(-0.5 * j, 0.5 * j)),
    )


def generate_synthetic(cfg: SyntheticConfig, out_dir) -> Manifest:
    """
    Write images, masks and a manifest under `out_dir`; return the manifest.

    The output depends only on the config, so rerunning with the same seed
    reproduces every file bit for bit.
    """
    out_dir = Path(out_dir)
    image_dir, mask_dir = out_dir / 'images', out_dir / 'masks'
    image_dir.mkdir(parents=True, exist_ok=True)
    mask_dir.mkdir(parents=True, exist_ok=True)

    records = []
    for patient in range(cfg.num_patients):
        rng = np.random.default_rng([cfg.patient_shape_seed, patient])
        template, template_mask = _patient_template(cfg, rng)
        count = cfg.images_per_patient
        if cfg.min_images_per_patient is not None:
            count = int(rng.integers(cfg.min_images_per_patient, cfg.images_per_patient + 1))

        patient_id = f'P{patient:03d}'
        for timestamp in range(count):
            image_rng = np.random.default_rng([cfg.patient_shape_seed, patient, timestamp + 1])
            params = _jitter(cfg, image_rng)
            image = apply_affine(template, params, order=1)
            mask = apply_affine(template_mask, params, order=0)
            image = image + image_rng.normal(0.0, cfg.noise_std, size=image.shape)

            image_id = f'{patient_id}_T{timestamp:02d}'
            image_path = write_png(
                np.rint(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8),
                image_dir / f'{image_id}.png',
            )
            mask_path = write_png(mask.astype(np.uint8), mask_dir / f'{image_id}.png')
            records.append(ImageRecord(
                image_id=image_id,
                patient_id=patient_id,
                image_path=image_path,
                mask_path=mask_path,
                timestamp_index=timestamp,
            ))

    annotated = round(cfg.annotated_fraction * len(records))
    if annotated < len(records):
        rng = np.random.default_rng([cfg.patient_shape_seed, 2**31 - 1])
        keep = set(rng.choice(len(records), size=annotated, replace=False).tolist())
        records = [
            record if position in keep else ImageRecord(
                record.image_id, record.patient_id, record.image_path,
                None, record.timestamp_index,
            )
            for position, record in enumerate(records)
        ]

    manifest = Manifest(tuple(records), source=out_dir / MANIFEST_NAME)
    write_manifest(manifest, out_dir / MANIFEST_NAME)
    logger.info(
        "Generated %d images for %d patients in %s (%d annotated)",
        len(records), cfg.num_patients, out_dir, annotated,
    )
    return manifest


def separability(manifest: Manifest) -> tuple[float, float]:
    """Mean pairwise pixel MSE within patients and across patients."""
    images = {record.image_id: read_image(record.image_path) / 255.0 for record in manifest}
    within, across = [], []
    for first, second in itertools.combinations(manifest.records, 2):
        mse = float(np.mean((images[first.image_id] - images[second.image_id]) ** 2))
        (within if first.patient_id == second.patient_id else across).append(mse)
    return (
        float(np.mean(within)) if within else float('nan'),
        float(np.mean(across)) if across else float('nan'),
    )
