"""
Supervised fine-tuning of the segmentation network under an annotation
budget, evaluated by patient-grouped cross-validation.
"""
from __future__ import annotations

import copy
import logging
import math
from typing import Callable, Iterable, Optional

import numpy as np
import torch
import torch.nn.functional as F
from rest_framework import serializers
from sklearn.model_selection import GroupKFold
from tqdm import tqdm

from Cltci.augmentation.transforms import augment_pair
from Cltci.datasets.bank import ImageBank
from Cltci.datasets.preprocessing import PreprocessConfig
from Cltci.datasets.records import Manifest
from Cltci.evaluation.metrics import CLASSES, DiceReport, mean_dice
from Cltci.networks.checkpoints import Checkpoint, transfer_encoder
from Cltci.networks.segmentation import SegmentationNet, build_segmentation_net, predict_masks

from .config import FinetuneConfig
from .schedules import cosine_lr, set_lr

logger = logging.getLogger(__name__)

RANDOM_INIT = 'random'


def fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def require_masks(manifest: Manifest) -> None:
    missing = [record.image_id for record in manifest if not record.has_mask]
    if missing:
        raise serializers.ValidationError({'mask_path': [f"No mask for image '{image_id}'." for image_id in missing]})


def patient_folds(manifest: Manifest, folds: int) -> list[tuple[Manifest, Manifest]]:
    """(train, validation) manifests; every patient is validated exactly once."""
    if manifest.num_patients < folds:
        raise serializers.ValidationError({
            'folds': f"{folds} folds need at least {folds} patients, manifest has {manifest.num_patients}."
        })
    groups = [record.patient_id for record in manifest]
    splits = GroupKFold(n_splits=folds).split(np.zeros(len(manifest)), groups=groups)
    return [
        (
            Manifest(tuple(manifest.records[i] for i in train), source=manifest.source),
            Manifest(tuple(manifest.records[i] for i in validation), source=manifest.source),
        )
        for train, validation in splits
    ]


def budget_subset(manifest: Manifest, budget: Optional[int], seed: int, fold: int) -> Manifest:
    """
    The first `budget` records of a permutation seeded by (seed, fold).

    Smaller budgets are prefixes of larger ones for the same seed and fold.
    """
    records = sorted(manifest.records, key=lambda record: record.image_id)
    if budget is None:
        return Manifest(tuple(records), source=manifest.source)
    if budget > len(records):
        raise serializers.ValidationError({
            'M': f"Budget {budget} exceeds the {len(records)} images of training fold {fold}."
        })
    order = np.random.default_rng([seed, fold]).permutation(len(records))
    return Manifest(tuple(records[i] for i in order[:budget]), source=manifest.source)


def segmentation_loss(logits: torch.Tensor, target: torch.Tensor, smooth: float = 1.0) -> torch.Tensor:
    """Cross-entropy plus soft Dice loss (1 - mean soft Dice over classes)."""
    cross_entropy = F.cross_entropy(logits, target)
    probabilities = logits.softmax(dim=1)
    one_hot = F.one_hot(target, logits.shape[1]).permute(0, 3, 1, 2).to(probabilities.dtype)
    intersection = (probabilities * one_hot).sum(dim=(0, 2, 3))
    totals = probabilities.sum(dim=(0, 2, 3)) + one_hot.sum(dim=(0, 2, 3))
    soft_dice = (2 * intersection + smooth) / (totals + smooth)
    return cross_entropy + (1 - soft_dice.mean())


def evaluate_segmentation(net: SegmentationNet, bank: ImageBank, image_ids: Iterable[str]) -> dict[int, float]:
    image_ids = list(image_ids)
    predictions = predict_masks(net, bank.stack_images(image_ids))
    return mean_dice(list(predictions), list(bank.stack_masks(image_ids)), CLASSES)


def train_segmentation(
    net: SegmentationNet,
    bank: ImageBank,
    manifest: Manifest,
    cfg: FinetuneConfig,
    fold: int = 0,
    progress: bool = False,
) -> list[float]:
    """
    Train on `manifest` and keep the weights of the epoch with the lowest
    mean training loss. Returns the per-epoch training losses.
    """
    image_ids = [record.image_id for record in manifest]
    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    steps_per_epoch = math.ceil(len(image_ids) / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    step = 0
    best_loss, best_state = math.inf, None
    losses = []

    for epoch in tqdm(range(1, cfg.epochs + 1), desc=f'fold {fold}', disable=not progress, leave=False):
        net.train()
        rng = np.random.default_rng([cfg.seed, fold, epoch])
        order = rng.permutation(len(image_ids))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch_ids = [image_ids[i] for i in order[start:start + cfg.batch_size]]
            pairs = [augment_pair(bank.image(i), bank.mask(i), cfg.augment, rng) for i in batch_ids]
            images = torch.from_numpy(np.stack([image for image, _ in pairs])[:, None])
            targets = torch.from_numpy(np.stack([mask for _, mask in pairs]).astype(np.int64))

            set_lr(optimizer, cosine_lr(step, total_steps, cfg.lr))
            loss = segmentation_loss(net(images), targets)
            if not torch.isfinite(loss):
                raise ValueError(f"Non-finite training loss in fold {fold}, epoch {epoch} (images {batch_ids})")
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
            step += 1

        mean_loss = float(np.mean(epoch_losses))
        losses.append(mean_loss)
        if mean_loss < best_loss:
            best_loss, best_state = mean_loss, copy.deepcopy(net.state_dict())

    net.load_state_dict(best_state)
    logger.debug("Fold %d: best training loss %.6f", fold, best_loss)
    return losses


def finetune(
    manifest: Manifest,
    checkpoint: Optional[Checkpoint],
    cfg: FinetuneConfig,
    preprocess: Optional[PreprocessConfig] = None,
    bank: Optional[ImageBank] = None,
    num_workers: int = 0,
    variant: Optional[str] = None,
    on_report: Optional[Callable[[DiceReport], None]] = None,
    progress: bool = False,
) -> tuple[SegmentationNet, list[DiceReport]]:
    """
    Cross-validated fine-tuning for every budget in `cfg.budgets`.

    Without a checkpoint the network keeps its fresh initialization, which
    is the random-init baseline. Returns the last trained network and one
    DiceReport per (budget, fold).
    """
    require_masks(manifest)
    preprocess = preprocess or PreprocessConfig(target_size=cfg.encoder.input_size)
    if preprocess.target_size != cfg.encoder.input_size:
        raise ValueError(
            f"Images are preprocessed to {preprocess.target_size}px "
            f"but the encoder expects {cfg.encoder.input_size}px"
        )
    if checkpoint is not None and checkpoint.encoder_spec.variant != cfg.encoder.variant:
        raise ValueError(
            f"Checkpoint encoder variant '{checkpoint.encoder_spec.variant.value}' does not match "
            f"configured variant '{cfg.encoder.variant.value}'"
        )
    if variant is None:
        variant = checkpoint.metadata.get('pretrain_variant', 'pretrained') if checkpoint else RANDOM_INIT

    folds = patient_folds(manifest, cfg.folds)
    subsets = {
        (budget, fold): budget_subset(train, budget, cfg.seed, fold)
        for budget in cfg.budgets
        for fold, (train, _) in enumerate(folds)
    }
    bank = bank or ImageBank(manifest, preprocess, num_workers=num_workers)

    net, reports = None, []
    for budget in cfg.budgets:
        for fold, (_, validation) in enumerate(folds):
            subset = subsets[(budget, fold)]
            net = build_segmentation_net(cfg.encoder, seed=fold_seed(cfg.seed, fold))
            if checkpoint is not None:
                net, _ = transfer_encoder(checkpoint, net)
            train_segmentation(net, bank, subset, cfg, fold=fold, progress=progress)
            per_class = evaluate_segmentation(net, bank, (record.image_id for record in validation))
            report = DiceReport(
                variant=variant, M=len(subset), fold=fold, seed=cfg.seed, per_class=per_class,
            )
            reports.append(report)
            logger.info(
                "[%s] M=%d fold %d: left %.4f right %.4f mean %.4f",
                variant, report.M, fold, report.dice_left, report.dice_right, report.mean_foreground,
            )
            if on_report is not None:
                on_report(report)
    return net, reports
