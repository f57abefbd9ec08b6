"""
Encoder embeddings and how well they cluster by patient.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
import torch
from sklearn.decomposition import PCA
from sklearn.manifold import TSNE
from sklearn.neighbors import NearestNeighbors

from Cltci.datasets.bank import ImageBank
from Cltci.datasets.preprocessing import PreprocessConfig
from Cltci.datasets.records import Manifest
from Cltci.networks.checkpoints import Checkpoint, load_state_arrays
from Cltci.networks.encoders import Encoder

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddingSet:
    vectors: np.ndarray
    patient_ids: tuple[str, ...]
    image_ids: tuple[str, ...]

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValueError(f"Embeddings must be n x d, got shape {vectors.shape}")
        object.__setattr__(self, 'vectors', vectors)
        object.__setattr__(self, 'patient_ids', tuple(self.patient_ids))
        object.__setattr__(self, 'image_ids', tuple(self.image_ids))
        if not len(self.patient_ids) == len(self.image_ids) == vectors.shape[0]:
            raise ValueError("vectors, patient_ids and image_ids must have equal length")

    def __len__(self):
        return len(self.image_ids)

    def with_patient_ids(self, patient_ids: Sequence[str]) -> 'EmbeddingSet':
        return EmbeddingSet(self.vectors, tuple(patient_ids), self.image_ids)


def encoder_from_checkpoint(checkpoint: Checkpoint) -> Encoder:
    encoder = Encoder(checkpoint.encoder_spec)
    load_state_arrays(encoder, checkpoint.with_prefix('encoder.'))
    return encoder.eval()


@torch.no_grad()
def export_embeddings(
    manifest: Manifest,
    checkpoint: Checkpoint,
    preprocess: Optional[PreprocessConfig] = None,
    bank: Optional[ImageBank] = None,
    batch_size: int = 32,
) -> EmbeddingSet:
    """Pooled encoder features (before the projection head) of every record, unaugmented."""
    encoder = encoder_from_checkpoint(checkpoint)
    preprocess = preprocess or PreprocessConfig(target_size=encoder.spec.input_size)
    bank = bank or ImageBank(manifest, preprocess)
    image_ids = [record.image_id for record in manifest]
    features = []
    for start in range(0, len(image_ids), batch_size):
        images = torch.from_numpy(bank.stack_images(image_ids[start:start + batch_size]))
        features.append(encoder(images)[0].numpy())
    return EmbeddingSet(
        np.concatenate(features),
        tuple(record.patient_id for record in manifest),
        tuple(image_ids),
    )


def patient_cluster_purity(embeddings: EmbeddingSet, k: int = 3) -> float:
    """
    Fraction of points for which more than half of their k cosine-nearest
    neighbours (self excluded) belong to the same patient.
    """
    count = len(embeddings)
    if count <= 1:
        raise ValueError("Purity needs at least 2 embeddings")
    if not 1 <= k < count:
        raise ValueError(f"k must lie in [1, {count - 1}], got {k}")

    neighbours = NearestNeighbors(n_neighbors=k + 1, metric='cosine').fit(embeddings.vectors)
    _, indices = neighbours.kneighbors(embeddings.vectors)
    labels = np.asarray(embeddings.patient_ids, dtype=object)

    hits = 0
    for point, row in enumerate(indices):
        others = [index for index in row if index != point][:k]
        same = int(np.sum(labels[others] == labels[point]))
        hits += same > k / 2
    return hits / count


def chance_purity(embeddings: EmbeddingSet, k: int = 3, permutations: int = 100, seed: int = 0) -> float:
    """Mean purity with patient ids randomly shuffled across points."""
    rng = np.random.default_rng(seed)
    labels = np.asarray(embeddings.patient_ids, dtype=object)
    scores = [
        patient_cluster_purity(embeddings.with_patient_ids(rng.permutation(labels)), k)
        for _ in range(permutations)
    ]
    return float(np.mean(scores))


def similarity_gap(embeddings: EmbeddingSet) -> tuple[float, float]:
    """Mean cosine similarity within patients and across patients."""
    unit = embeddings.vectors / np.maximum(np.linalg.norm(embeddings.vectors, axis=1, keepdims=True), 1e-12)
    similarity = unit @ unit.T
    labels = np.asarray(embeddings.patient_ids, dtype=object)
    same = labels[:, None] == labels[None, :]
    off_diagonal = ~np.eye(len(labels), dtype=bool)
    within = similarity[same & off_diagonal]
    across = similarity[~same]
    return (
        float(within.mean()) if within.size else float('nan'),
        float(across.mean()) if across.size else float('nan'),
    )


def project_2d(vectors: np.ndarray, seed: int = 0) -> np.ndarray:
    """2-D layout for figures: t-SNE, or PCA for sets too small for t-SNE."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if len(vectors) < 5:
        components = min(2, *vectors.shape)
        projected = PCA(n_components=components).fit_transform(vectors)
        return np.pad(projected, ((0, 0), (0, 2 - components)))
    perplexity = min(30.0, (len(vectors) - 1) / 3)
    return TSNE(n_components=2, perplexity=perplexity, init='pca', random_state=seed).fit_transform(vectors)


def write_embeddings_csv(embeddings: EmbeddingSet, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    width = embeddings.vectors.shape[1]
    frame = pd.DataFrame(embeddings.vectors, columns=[f'v{i}' for i in range(width)])
    frame.insert(0, 'patient_id', embeddings.patient_ids)
    frame.insert(0, 'image_id', embeddings.image_ids)
    frame.to_csv(path, index=False, lineterminator='\n')
    logger.info("Wrote %d embeddings to %s", len(embeddings), path)
    return path


def read_embeddings_csv(path) -> EmbeddingSet:
    frame = pd.read_csv(path, dtype={'image_id': str, 'patient_id': str}, float_precision='round_trip')
    vector_columns = [column for column in frame.columns if column.startswith('v')]
    return EmbeddingSet(
        frame[vector_columns].to_numpy(dtype=np.float64),
        tuple(frame['patient_id']),
        tuple(frame['image_id']),
    )
