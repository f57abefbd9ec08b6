"""
Positive sets for the contrastive loss.

Views are laid out interleaved: the two augmentations of image i sit at rows
2i and 2i + 1, so each view's sibling is its index with the lowest bit
flipped.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import torch

from .similarity import as_matrix


def view_pair_index(num_views: int) -> list[int]:
    """Sibling of every view in an interleaved two-view batch."""
    if num_views < 2 or num_views % 2:
        raise ValueError(f"Two-view batches need an even number of views, got {num_views}")
    return [index ^ 1 for index in range(num_views)]


def repeat_views(values: Sequence) -> list:
    """Per-image values expanded to the interleaved per-view layout."""
    return [value for value in values for _ in range(2)]


@dataclass(frozen=True)
class RepresentationBatch:
    """Unit-norm view representations with their patient identities."""

    vectors: torch.Tensor
    patient_ids: tuple[str, ...]
    view_pair_index: tuple[int, ...]

    def __post_init__(self):
        vectors = as_matrix(self.vectors, 'vectors')
        object.__setattr__(self, 'vectors', vectors)
        object.__setattr__(self, 'patient_ids', tuple(self.patient_ids))
        object.__setattr__(self, 'view_pair_index', tuple(self.view_pair_index))
        count = vectors.shape[0]
        if len(self.patient_ids) != count or len(self.view_pair_index) != count:
            raise ValueError("vectors, patient_ids and view_pair_index must have equal length")
        for view, sibling in enumerate(self.view_pair_index):
            if self.patient_ids[view] != self.patient_ids[sibling]:
                raise ValueError(f"View {view} and its sibling {sibling} belong to different patients")
        norms = torch.linalg.vector_norm(vectors.detach(), dim=1)
        off = (norms - 1).abs() > 1e-5
        if off.any():
            raise ValueError(f"Row {int(off.nonzero()[0])} of vectors is not unit-norm")

    @classmethod
    def from_views(cls, vectors, image_patient_ids: Sequence[str]) -> 'RepresentationBatch':
        """Build from interleaved views and one patient id per image."""
        patient_ids = repeat_views(image_patient_ids)
        return cls(vectors, tuple(patient_ids), tuple(view_pair_index(len(patient_ids))))

    def __len__(self):
        return len(self.patient_ids)


@dataclass(frozen=True)
class PositiveMask:
    """
    mask[i, j]: candidate j is a positive of anchor i.
    valid[i, j]: candidate j takes part in anchor i's denominator.
    """

    mask: torch.Tensor
    valid: torch.Tensor

    def __post_init__(self):
        mask = torch.as_tensor(self.mask, dtype=torch.bool)
        valid = torch.as_tensor(self.valid, dtype=torch.bool)
        if mask.shape != valid.shape or mask.ndim != 2:
            raise ValueError(f"mask {tuple(mask.shape)} and valid {tuple(valid.shape)} must be equal 2-D shapes")
        if (mask & ~valid).any():
            raise ValueError("Every positive must also be a valid candidate")
        empty = (mask.sum(dim=1) == 0).nonzero().flatten()
        if len(empty):
            raise ValueError(f"Anchor {int(empty[0])} has no positives")
        object.__setattr__(self, 'mask', mask)
        object.__setattr__(self, 'valid', valid)

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.mask.shape)

    @property
    def positives_per_anchor(self) -> list[int]:
        return self.mask.sum(dim=1).tolist()

    @property
    def candidates_per_anchor(self) -> list[int]:
        return self.valid.sum(dim=1).tolist()


def build_positive_mask(
    anchor_ids: Sequence[str],
    candidate_ids: Optional[Sequence[str]] = None,
    sibling_map: Optional[Union[Sequence[int], Mapping[int, int]]] = None,
    match_patients: bool = True,
    exclude_self: Optional[bool] = None,
) -> PositiveMask:
    """
    Positives are candidates sharing the anchor's patient id.

    Without `candidate_ids` the anchors are their own candidates (in-batch
    contrast) and the self-comparison i == j is excluded from both the
    positives and the denominator. A separate candidate set, such as keys
    scored against queries, keeps every pair unless `exclude_self=True`.
    `sibling_map` marks each anchor's paired view as a positive regardless
    of ids. With `match_patients=False` only the siblings are positive,
    which is the single-positive baseline.
    """
    in_batch = candidate_ids is None
    anchor_ids = list(anchor_ids)
    candidate_ids = list(anchor_ids if in_batch else candidate_ids)
    if not anchor_ids or not candidate_ids:
        raise ValueError("anchor_ids and candidate_ids must be non-empty")
    if exclude_self is None:
        exclude_self = in_batch
    if exclude_self and len(anchor_ids) != len(candidate_ids):
        raise ValueError("Self-exclusion needs as many candidates as anchors")

    rows, cols = len(anchor_ids), len(candidate_ids)
    valid = torch.ones(rows, cols, dtype=torch.bool)
    if exclude_self:
        valid.fill_diagonal_(False)

    if match_patients:
        labels = {label: code for code, label in enumerate(dict.fromkeys(anchor_ids + candidate_ids))}
        anchor_codes = torch.tensor([labels[label] for label in anchor_ids])
        candidate_codes = torch.tensor([labels[label] for label in candidate_ids])
        mask = anchor_codes[:, None] == candidate_codes[None, :]
    else:
        mask = torch.zeros(rows, cols, dtype=torch.bool)

    if sibling_map is not None:
        pairs = sibling_map.items() if isinstance(sibling_map, Mapping) else enumerate(sibling_map)
        for anchor, sibling in pairs:
            if not 0 <= sibling < cols:
                raise ValueError(f"Sibling {sibling} of anchor {anchor} is out of range")
            mask[anchor, sibling] = True
    mask &= valid

    empty = (mask.sum(dim=1) == 0).nonzero().flatten().tolist()
    if empty:
        raise ValueError(
            f"Anchor {empty[0]} (patient '{anchor_ids[empty[0]]}') has no positives"
        )
    return PositiveMask(mask, valid)
