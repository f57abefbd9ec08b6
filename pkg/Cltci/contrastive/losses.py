"""
Multi-positive temperature-scaled contrastive loss.

For anchor i with positive set P(i) and valid candidates V(i):

    L_i = -1/|P(i)| * sum_{j in P(i)} log( exp(s_ij / tau) / sum_{k in V(i)} exp(s_ik / tau) )

where s is cosine similarity. The total is sum_i L_i, or that sum divided by
the number of anchors for the mean reduction. With a single positive per
anchor (its sibling view) this is the NT-Xent objective.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import torch
import torch.nn.functional as F

from .masks import PositiveMask, RepresentationBatch, view_pair_index
from .similarity import as_matrix, l2_normalize


class Reduction(str, Enum):
    SUM = 'sum'
    MEAN = 'mean'


@dataclass(frozen=True)
class LossConfig:
    temperature: float = 0.1
    reduction: Reduction = Reduction.MEAN

    def __post_init__(self):
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        object.__setattr__(self, 'reduction', Reduction(self.reduction))


@dataclass(frozen=True)
class CandidateSet:
    """
    Per-anchor candidates: anchor i's own sibling key followed by a queue
    snapshot shared by every anchor. Column 0 of the similarity matrix is
    the sibling.
    """

    siblings: torch.Tensor
    queue: torch.Tensor
    queue_labels: tuple[str, ...] = ()

    def __post_init__(self):
        siblings = as_matrix(self.siblings, 'siblings')
        queue = torch.as_tensor(self.queue)
        if queue.numel() == 0:
            queue = siblings.new_zeros((0, siblings.shape[1]))
        queue = queue.to(siblings.dtype)
        if queue.ndim != 2 or queue.shape[1] != siblings.shape[1]:
            raise ValueError(f"Queue shape {tuple(queue.shape)} does not match key width {siblings.shape[1]}")
        if len(self.queue_labels) != queue.shape[0]:
            raise ValueError("queue_labels must align with queue rows")
        object.__setattr__(self, 'siblings', siblings)
        object.__setattr__(self, 'queue', queue)
        object.__setattr__(self, 'queue_labels', tuple(self.queue_labels))

    @property
    def num_candidates(self) -> int:
        return 1 + self.queue.shape[0]

    def similarities(self, anchors: torch.Tensor) -> torch.Tensor:
        """A x (1 + Q) cosine similarities for unit-norm anchors."""
        if anchors.shape[0] != self.siblings.shape[0]:
            raise ValueError(
                f"{anchors.shape[0]} anchors but {self.siblings.shape[0]} sibling keys"
            )
        siblings = l2_normalize(self.siblings.to(anchors.dtype), 'siblings')
        own = (anchors * siblings).sum(dim=1, keepdim=True)
        if self.queue.shape[0] == 0:
            return own
        queue = l2_normalize(self.queue.to(anchors.dtype), 'queue')
        return torch.cat([own, anchors @ queue.T], dim=1)


def _similarities(anchors, candidates) -> tuple[torch.Tensor, torch.Tensor]:
    if isinstance(anchors, RepresentationBatch):
        anchors = anchors.vectors
    anchors = l2_normalize(as_matrix(anchors, 'anchors'), 'anchors')
    if candidates is None:
        return anchors, anchors @ anchors.T
    if isinstance(candidates, CandidateSet):
        return anchors, candidates.similarities(anchors)
    candidates = l2_normalize(as_matrix(candidates, 'candidates').to(anchors.dtype), 'candidates')
    return anchors, anchors @ candidates.T


def contrastive_loss(
    anchors: Union[torch.Tensor, RepresentationBatch],
    mask: PositiveMask,
    cfg: Optional[LossConfig] = None,
    candidates: Union[None, torch.Tensor, CandidateSet] = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Return (total loss, per-anchor losses L_i).

    `candidates=None` contrasts the anchors with each other (in-batch);
    a matrix contrasts every anchor with the same candidates; a
    CandidateSet gives each anchor its own sibling plus the shared queue.
    Rows are L2-normalized here, so raw encoder outputs may be passed.
    """
    cfg = cfg or LossConfig()
    anchors, similarity = _similarities(anchors, candidates)
    if tuple(similarity.shape) != mask.shape:
        raise ValueError(
            f"Similarity shape {tuple(similarity.shape)} does not match mask shape {mask.shape}"
        )
    if not torch.isfinite(similarity).all():
        raise ValueError("Non-finite similarity encountered")

    valid = mask.valid.to(similarity.device)
    positives = mask.mask.to(similarity.device)

    logits = similarity / cfg.temperature
    logits = torch.where(valid, logits, torch.full_like(logits, -math.inf))
    row_max = logits.max(dim=1, keepdim=True).values.detach()
    shifted = logits - row_max
    log_prob = shifted - torch.log(torch.exp(shifted).sum(dim=1, keepdim=True))

    positive_log_prob = torch.where(positives, log_prob, torch.zeros_like(log_prob)).sum(dim=1)
    per_anchor = -positive_log_prob / positives.sum(dim=1).to(log_prob.dtype)

    total = per_anchor.sum()
    if cfg.reduction == Reduction.MEAN:
        total = total / per_anchor.shape[0]
    return total, per_anchor


def contrastive_loss_gradient(
    anchors,
    mask: PositiveMask,
    cfg: Optional[LossConfig] = None,
    candidates=None,
):
    """
    Gradient of the total loss with respect to the representation rows.

    Returns the anchor gradient for in-batch contrast, otherwise the pair
    (anchor gradient, candidate gradient); for a CandidateSet the candidate
    gradient is the pair (siblings, queue).
    """
    if isinstance(anchors, RepresentationBatch):
        anchors = anchors.vectors
    anchors = as_matrix(anchors, 'anchors').detach().clone().requires_grad_(True)
    inputs = [anchors]
    if isinstance(candidates, CandidateSet):
        siblings = candidates.siblings.detach().clone().requires_grad_(True)
        queue = candidates.queue.detach().clone().requires_grad_(True)
        candidates = CandidateSet(siblings, queue, candidates.queue_labels)
        inputs += [siblings, queue]
    elif candidates is not None:
        candidates = as_matrix(candidates, 'candidates').detach().clone().requires_grad_(True)
        inputs.append(candidates)

    total, _ = contrastive_loss(anchors, mask, cfg, candidates=candidates)
    grads = torch.autograd.grad(total, inputs, allow_unused=True)
    grads = [
        torch.zeros_like(tensor) if grad is None else grad
        for tensor, grad in zip(inputs, grads)
    ]
    if len(grads) == 1:
        return grads[0]
    if len(grads) == 2:
        return grads[0], grads[1]
    return grads[0], (grads[1], grads[2])


def nt_xent_loss(z, temperature: float = 0.1) -> torch.Tensor:
    """
    Single-positive NT-Xent over interleaved views (mean over 2N anchors).

    Each view's only positive is its sibling; every other view is a negative.
    """
    z = F.normalize(as_matrix(z, 'z'), dim=1)
    targets = torch.tensor(view_pair_index(z.shape[0]))
    logits = (z @ z.T) / temperature
    logits = logits.masked_fill(torch.eye(z.shape[0], dtype=torch.bool), -math.inf)
    return F.cross_entropy(logits, targets)

