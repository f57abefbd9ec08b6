"""
Pseudo-labeled FIFO dictionary of key representations.

Storage is a fixed ring buffer; `cursor` is the next slot to overwrite. Once
the buffer is full the cursor also points at the oldest entry, so overwriting
it evicts in insertion order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from Cltci.contrastive.losses import CandidateSet
from Cltci.contrastive.masks import PositiveMask

logger = logging.getLogger(__name__)

UNIT_NORM_TOLERANCE = 1e-4


@dataclass(frozen=True)
class MoCoConfig:
    momentum: float = 0.999
    queue_capacity: int = 4096

    def __post_init__(self):
        if not 0.0 <= self.momentum <= 1.0:
            raise ValueError(f"momentum must be in [0, 1], got {self.momentum}")
        if self.queue_capacity < 1:
            raise ValueError(f"queue_capacity must be positive, got {self.queue_capacity}")


@dataclass(frozen=True)
class QueueSnapshot:
    """Immutable copy of the queue contents, oldest entry first."""

    vectors: torch.Tensor
    labels: tuple[str, ...]

    def __len__(self):
        return len(self.labels)


class LabeledQueue:
    """Fixed-capacity FIFO of unit vectors, each tagged with a patient label."""

    def __init__(self, capacity: int, dim: int):
        if capacity < 1 or dim < 1:
            raise ValueError(f"capacity and dim must be positive, got {capacity}, {dim}")
        self.capacity = capacity
        self.dim = dim
        self.vectors = torch.zeros(capacity, dim, dtype=torch.float32)
        self.labels: list = [None] * capacity
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"<LabeledQueue {self.size}/{self.capacity} d={self.dim}>"

    @property
    def is_full(self) -> bool:
        return self.size == self.capacity

    def _order(self) -> torch.Tensor:
        start = (self.cursor - self.size) % self.capacity
        return (start + torch.arange(self.size)) % self.capacity

    def enqueue(self, keys, labels: Sequence[str]) -> 'LabeledQueue':
        """
        Append keys in order, evicting the oldest entries once full.

        Keys are detached copies; rows must be unit-norm.
        """
        keys = torch.as_tensor(keys).detach().to(torch.float32)
        if keys.ndim != 2 or keys.shape[1] != self.dim:
            raise ValueError(f"Keys must be k x {self.dim}, got {tuple(keys.shape)}")
        count = keys.shape[0]
        if count > self.capacity:
            raise ValueError(f"Cannot enqueue {count} keys into a queue of capacity {self.capacity}")
        if len(labels) != count:
            raise ValueError(f"{count} keys but {len(labels)} labels")
        norms = torch.linalg.vector_norm(keys, dim=1)
        off = ((norms - 1).abs() > UNIT_NORM_TOLERANCE).nonzero().flatten()
        if len(off):
            raise ValueError(f"Key row {int(off[0])} is not unit-norm (norm {float(norms[off[0]]):.6f})")

        slots = (self.cursor + torch.arange(count)) % self.capacity
        self.vectors[slots] = keys
        for slot, label in zip(slots.tolist(), labels):
            self.labels[slot] = str(label)
        self.cursor = (self.cursor + count) % self.capacity
        self.size = min(self.capacity, self.size + count)
        return self

    def snapshot(self) -> QueueSnapshot:
        order = self._order()
        return QueueSnapshot(
            vectors=self.vectors[order].clone(),
            labels=tuple(self.labels[slot] for slot in order.tolist()),
        )

    def state(self) -> dict:
        """Raw buffer plus bookkeeping, for checkpointing."""
        return {
            'vectors': self.vectors.numpy().copy(),
            'labels': ['' if label is None else label for label in self.labels],
            'cursor': self.cursor,
            'size': self.size,
        }

    @classmethod
    def from_state(cls, state: dict) -> 'LabeledQueue':
        vectors = np.asarray(state['vectors'], dtype=np.float32)
        queue = cls(*vectors.shape)
        queue.vectors = torch.from_numpy(vectors.copy())
        queue.size = int(state['size'])
        queue.cursor = int(state['cursor'])
        labels = list(state['labels'])
        if len(labels) != queue.capacity or not 0 <= queue.size <= queue.capacity:
            raise ValueError("Queue state is inconsistent with its capacity")
        live = set(queue._order().tolist())
        queue.labels = [label if slot in live else None for slot, label in enumerate(labels)]
        return queue


def enqueue(queue: LabeledQueue, keys, labels: Sequence[str]) -> LabeledQueue:
    return queue.enqueue(keys, labels)


def queue_candidates(
    queue: LabeledQueue,
    anchor_labels: Sequence[str],
    sibling_keys,
    match_patients: bool = True,
) -> tuple[CandidateSet, tuple[str, ...], PositiveMask]:
    """
    Candidates for each anchor: its sibling key, then the queue snapshot.

    The sibling is always a positive. Queue entries are positives when
    their label equals the anchor's label (or never, with
    `match_patients=False`). Every candidate is valid.
    Returns (candidates, queue labels, mask); mask column 0 is the sibling.
    """
    snapshot = queue.snapshot()
    candidates = CandidateSet(torch.as_tensor(sibling_keys).detach(), snapshot.vectors, snapshot.labels)
    anchors = len(anchor_labels)
    if candidates.siblings.shape[0] != anchors:
        raise ValueError(f"{anchors} anchor labels but {candidates.siblings.shape[0]} sibling keys")

    mask = torch.zeros(anchors, candidates.num_candidates, dtype=torch.bool)
    mask[:, 0] = True
    if match_patients and len(snapshot):
        queue_labels = np.asarray(snapshot.labels, dtype=object)
        for row, label in enumerate(anchor_labels):
            mask[row, 1:] = torch.from_numpy(queue_labels == label)
    valid = torch.ones_like(mask)
    return candidates, snapshot.labels, PositiveMask(mask, valid)
