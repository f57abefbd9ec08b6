"""
Dice overlap and per-run Dice reports.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

BACKGROUND, LEFT_LUNG, RIGHT_LUNG = 0, 1, 2
CLASSES = (BACKGROUND, LEFT_LUNG, RIGHT_LUNG)
FOREGROUND = (LEFT_LUNG, RIGHT_LUNG)


def dice(pred: np.ndarray, truth: np.ndarray, label: int) -> float:
    """
    2|P & T| / (|P| + |T|) for one class.

    Both empty gives 1.0; exactly one empty gives 0.0.
    """
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"Prediction shape {pred.shape} != truth shape {truth.shape}")
    p, t = pred == label, truth == label
    total = int(p.sum()) + int(t.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(p, t).sum()) / total


def mean_dice(preds: Sequence[np.ndarray], truths: Sequence[np.ndarray],
              classes: Sequence[int] = CLASSES) -> dict[int, float]:
    """Per-class Dice averaged over images."""
    if len(preds) != len(truths) or not len(preds):
        raise ValueError("Need the same, non-zero number of predictions and ground truths")
    return {
        label: float(np.mean([dice(p, t, label) for p, t in zip(preds, truths)]))
        for label in classes
    }


@dataclass(frozen=True)
class DiceReport:
    """Validation Dice of one (variant, M, fold, seed) fine-tuning run."""

    variant: str
    M: int
    fold: int
    seed: int
    per_class: Mapping[int, float] = field(default_factory=dict)
    mean_foreground: Optional[float] = None

    def __post_init__(self):
        per_class = {int(label): float(value) for label, value in self.per_class.items()}
        missing = [label for label in FOREGROUND if label not in per_class]
        if missing:
            raise ValueError(f"Dice report lacks classes {missing}")
        for label, value in per_class.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Dice for class {label} out of [0, 1]: {value}")
        object.__setattr__(self, 'per_class', per_class)
        object.__setattr__(
            self, 'mean_foreground',
            float(np.mean([per_class[label] for label in FOREGROUND])),
        )

    @property
    def dice_left(self) -> float:
        return self.per_class[LEFT_LUNG]

    @property
    def dice_right(self) -> float:
        return self.per_class[RIGHT_LUNG]

    @property
    def dice_background(self) -> Optional[float]:
        return self.per_class.get(BACKGROUND)

    def as_row(self) -> dict:
        return {
            'variant': self.variant,
            'M': self.M,
            'fold': self.fold,
            'seed': self.seed,
            'dice_left': self.dice_left,
            'dice_right': self.dice_right,
            'mean_foreground': self.mean_foreground,
        }
