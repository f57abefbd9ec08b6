"""
Patient-grouped batch sampling.

A batch holds P distinct patients with K images each (N = P*K images, 2N
views after augmentation). K=1 gives the classic one-image-per-patient
batch; K>1 puts several same-patient positives in one batch. Patients with
fewer than K images are sampled with replacement inside the patient.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .records import ImageRecord, Manifest


@dataclass(frozen=True)
class SamplerConfig:
    patients_per_batch: int = 16
    images_per_patient: int = 2
    seed: Optional[int] = None

    def __post_init__(self):
        if self.patients_per_batch < 2:
            raise ValueError(
                f"patients_per_batch must be >= 2, got {self.patients_per_batch}"
            )
        if self.images_per_patient < 1:
            raise ValueError(
                f"images_per_patient must be >= 1, got {self.images_per_patient}"
            )

    @property
    def batch_images(self) -> int:
        """N = P * K."""
        return self.patients_per_batch * self.images_per_patient

    @property
    def batch_views(self) -> int:
        return 2 * self.batch_images


def as_generator(rng_state) -> np.random.Generator:
    """
    Normalize an rng state to a numpy Generator.

    Integers, sequences of integers and SeedSequences create a fresh
    generator; an existing Generator is used (and advanced) as is.
    """
    if isinstance(rng_state, np.random.Generator):
        return rng_state
    return np.random.default_rng(rng_state)


def sample_batch(manifest: Manifest, cfg: SamplerConfig, rng_state) -> list[ImageRecord]:
    """
    Draw P patients without replacement and K records from each.

    Records come out grouped by patient, in the order patients were drawn.
    """
    rng = as_generator(rng_state)
    patients = manifest.patient_ids
    if len(patients) < cfg.patients_per_batch:
        raise ValueError(
            f"Manifest has {len(patients)} patients, "
            f"batch needs {cfg.patients_per_batch}"
        )

    chosen = rng.choice(len(patients), size=cfg.patients_per_batch, replace=False)
    batch = []
    for patient_index in chosen:
        group = manifest.by_patient[patients[patient_index]]
        replace = len(group) < cfg.images_per_patient
        picks = rng.choice(len(group), size=cfg.images_per_patient, replace=replace)
        batch.extend(group[pick] for pick in picks)
    return batch
