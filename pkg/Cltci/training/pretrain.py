"""
Contrastive pretraining loops.

In-batch variant: both views of every image are anchors; candidates are all
other views in the batch. Positives are views of the same patient
(cl-tci-simclr) or the sibling view only (simclr-baseline).

Momentum variant: queries come from the trained network, keys from its
moving-average copy. Each query is contrasted with its sibling key and the
dictionary snapshot taken before the step; the step's keys are enqueued
only after the optimizer and momentum updates.
"""
from __future__ import annotations

import copy
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import torch
from tqdm import tqdm

from Cltci.contrastive.losses import contrastive_loss
from Cltci.contrastive.masks import build_positive_mask, repeat_views, view_pair_index
from Cltci.datasets.bank import ImageBank
from Cltci.datasets.preprocessing import PreprocessConfig
from Cltci.datasets.records import Manifest
from Cltci.moco.momentum import freeze, momentum_update_module
from Cltci.moco.queue import LabeledQueue, queue_candidates
from Cltci.networks.checkpoints import (
    Checkpoint, load_state_arrays, save_checkpoint, state_arrays,
)
from Cltci.networks.encoders import ContrastiveNet
from Cltci.networks.specs import FAN_IN_UNIFORM, EncoderSpec, ProjectionSpec

from .config import PretrainConfig, PretrainVariant
from .data import PretrainStepDataset, step_loader
from .logs import TrainingLogs
from .schedules import cosine_lr, set_lr

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = 'checkpoint.ckpt'
MOMENTUM_PREFIX = 'optim.momentum.'


@dataclass(frozen=True)
class StepTrace:
    epoch: int
    step: int
    global_step: int
    loss: float
    lr: float
    candidates_per_anchor: int
    positives_per_anchor: tuple[int, ...]
    queue_size_before: int = 0
    queue_size_after: int = 0


class SimCLRTrainer:
    variants = (PretrainVariant.CL_TCI_SIMCLR, PretrainVariant.SIMCLR_BASELINE)

    def __init__(self, cfg: PretrainConfig, net: Optional[ContrastiveNet] = None):
        if cfg.variant not in self.variants:
            raise ValueError(f"{type(self).__name__} cannot run variant '{cfg.variant.value}'")
        self.cfg = cfg
        self.net = net or ContrastiveNet(cfg.encoder, cfg.projection, seed=cfg.seed)
        self.optimizer = torch.optim.SGD(
            self.net.parameters(), lr=cfg.base_lr,
            momentum=cfg.momentum, weight_decay=cfg.weight_decay,
        )
        self.epoch = 0
        self.global_step = 0

    def _optimize(self, loss: torch.Tensor, lr: float) -> None:
        set_lr(self.optimizer, lr)
        self.optimizer.zero_grad(set_to_none=True)
        loss.backward()
        self.optimizer.step()

    def step(self, batch: dict, lr: float, epoch: Optional[int] = None) -> StepTrace:
        """One optimizer step on a batch of interleaved views."""
        self.net.train()
        views = batch['views']
        view_ids = repeat_views(batch['patient_ids'])
        mask = build_positive_mask(
            view_ids,
            sibling_map=view_pair_index(len(view_ids)),
            match_patients=self.cfg.match_patients,
        )
        loss, _ = contrastive_loss(self.net(views), mask, self.cfg.loss)
        self._optimize(loss, lr)
        trace = StepTrace(
            epoch=self.epoch + 1 if epoch is None else epoch,
            step=int(batch.get('step', 0)),
            global_step=self.global_step,
            loss=float(loss.detach()),
            lr=lr,
            candidates_per_anchor=mask.candidates_per_anchor[0],
            positives_per_anchor=tuple(mask.positives_per_anchor),
        )
        self.global_step += 1
        return trace

    def _momentum_arrays(self) -> dict:
        arrays = {}
        for name, parameter in self.net.named_parameters():
            buffer = self.optimizer.state.get(parameter, {}).get('momentum_buffer')
            if buffer is not None:
                arrays[MOMENTUM_PREFIX + name] = buffer.detach().cpu().numpy()
        return arrays

    def checkpoint(self, config_hash: str = '') -> Checkpoint:
        arrays = {
            **state_arrays(self.net.encoder, 'encoder.'),
            **state_arrays(self.net.head, 'head.'),
            **self._momentum_arrays(),
        }
        metadata = {
            'config_hash': config_hash,
            'epoch': self.epoch,
            'global_step': self.global_step,
            'variant': self.cfg.encoder.variant.value,
            'pretrain_variant': self.cfg.variant.value,
            'encoder_spec': self.cfg.encoder.to_dict(),
            'projection_spec': self.cfg.projection.to_dict(),
            'init_scheme': FAN_IN_UNIFORM,
            'seed': self.cfg.seed,
        }
        return Checkpoint(arrays, metadata)

    def restore(self, checkpoint: Checkpoint) -> None:
        """Continue from a checkpoint written by a trainer of the same variant."""
        variant = checkpoint.metadata.get('pretrain_variant')
        if variant != self.cfg.variant.value:
            raise ValueError(f"Checkpoint variant '{variant}' cannot resume a '{self.cfg.variant.value}' run")
        if EncoderSpec.from_dict(checkpoint.metadata['encoder_spec']) != self.cfg.encoder:
            raise ValueError("Checkpoint encoder does not match the configured encoder")
        if ProjectionSpec.from_dict(checkpoint.metadata['projection_spec']) != self.cfg.projection:
            raise ValueError("Checkpoint projection head does not match the configured head")
        load_state_arrays(self.net.encoder, checkpoint.with_prefix('encoder.'))
        load_state_arrays(self.net.head, checkpoint.with_prefix('head.'))
        for name, parameter in self.net.named_parameters():
            buffer = checkpoint.arrays.get(MOMENTUM_PREFIX + name)
            if buffer is not None:
                self.optimizer.state[parameter]['momentum_buffer'] = torch.from_numpy(buffer.copy())
        self.epoch = checkpoint.epoch
        self.global_step = int(checkpoint.metadata.get('global_step', 0))


class MoCoTrainer(SimCLRTrainer):
    variants = (PretrainVariant.CL_TCI_MOCO, PretrainVariant.MOCO_BASELINE)

    def __init__(self, cfg: PretrainConfig, net: Optional[ContrastiveNet] = None):
        super().__init__(cfg, net)
        self.key_net = freeze(copy.deepcopy(self.net)).eval()
        self.queue = LabeledQueue(cfg.moco.queue_capacity, cfg.projection.output_dim)

    def step(self, batch: dict, lr: float, epoch: Optional[int] = None) -> StepTrace:
        self.net.train()
        views = batch['views']
        view_ids = repeat_views(batch['patient_ids'])

        queries = self.net(views)
        with torch.no_grad():
            keys = self.key_net(views)
        siblings = keys[view_pair_index(len(view_ids))]

        before = len(self.queue)
        candidates, _, mask = queue_candidates(
            self.queue, view_ids, siblings, match_patients=self.cfg.match_patients
        )
        loss, _ = contrastive_loss(queries, mask, self.cfg.loss, candidates=candidates)
        self._optimize(loss, lr)
        momentum_update_module(self.key_net, self.net, self.cfg.moco.momentum)
        self.queue.enqueue(keys, view_ids)

        trace = StepTrace(
            epoch=self.epoch + 1 if epoch is None else epoch,
            step=int(batch.get('step', 0)),
            global_step=self.global_step,
            loss=float(loss.detach()),
            lr=lr,
            candidates_per_anchor=candidates.num_candidates,
            positives_per_anchor=tuple(mask.positives_per_anchor),
            queue_size_before=before,
            queue_size_after=len(self.queue),
        )
        self.global_step += 1
        return trace

    def checkpoint(self, config_hash: str = '') -> Checkpoint:
        checkpoint = super().checkpoint(config_hash)
        state = self.queue.state()
        checkpoint.arrays.update(state_arrays(self.key_net, 'key.'))
        checkpoint.arrays['queue.vectors'] = state['vectors']
        checkpoint.metadata['queue'] = {
            'labels': state['labels'], 'cursor': state['cursor'], 'size': state['size'],
        }
        checkpoint.metadata['momentum'] = self.cfg.moco.momentum
        return Checkpoint(checkpoint.arrays, checkpoint.metadata)

    def restore(self, checkpoint: Checkpoint) -> None:
        super().restore(checkpoint)
        load_state_arrays(self.key_net, checkpoint.with_prefix('key.'))
        self.queue = LabeledQueue.from_state({
            'vectors': checkpoint.arrays['queue.vectors'], **checkpoint.metadata['queue'],
        })


def trainer_for(cfg: PretrainConfig) -> SimCLRTrainer:
    return (MoCoTrainer if cfg.variant.is_moco else SimCLRTrainer)(cfg)


def pretrain(
    manifest: Manifest,
    cfg: PretrainConfig,
    out_dir=None,
    resume: Optional[Checkpoint] = None,
    preprocess: Optional[PreprocessConfig] = None,
    bank: Optional[ImageBank] = None,
    num_workers: int = 0,
    config_hash: str = '',
    on_step: Optional[Callable[[StepTrace], None]] = None,
    on_epoch: Optional[Callable[[dict], None]] = None,
    progress: bool = False,
) -> Checkpoint:
    """
    Run (or resume) pretraining and return the final checkpoint.

    With `out_dir`, the checkpoint is rewritten after every epoch and the
    metrics and loss-trace logs are appended as epochs finish.
    """
    preprocess = preprocess or PreprocessConfig(target_size=cfg.encoder.input_size)
    if preprocess.target_size != cfg.encoder.input_size:
        raise ValueError(
            f"Images are preprocessed to {preprocess.target_size}px "
            f"but the encoder expects {cfg.encoder.input_size}px"
        )
    if manifest.num_patients < cfg.sampler.patients_per_batch:
        raise ValueError(
            f"Manifest has {manifest.num_patients} patients, "
            f"batch needs {cfg.sampler.patients_per_batch}"
        )
    bank = bank or ImageBank(manifest, preprocess, num_workers=num_workers)

    trainer = trainer_for(cfg)
    if resume is not None:
        trainer.restore(resume)
        logger.info("Resuming %s from epoch %d", cfg.variant.value, trainer.epoch)

    steps = cfg.steps_for(len(manifest))
    total_steps = cfg.epochs * steps
    logs = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        logs = TrainingLogs(out_dir)
        logs.start(trainer.epoch)

    for epoch in range(trainer.epoch + 1, cfg.epochs + 1):
        started = time.perf_counter()
        dataset = PretrainStepDataset(bank, cfg.sampler, cfg.augment, cfg.seed, epoch, steps)
        traces = []
        for batch in tqdm(step_loader(dataset, num_workers), desc=f'epoch {epoch}',
                          disable=not progress, leave=False):
            lr = cosine_lr(trainer.global_step, total_steps, cfg.base_lr)
            trace = trainer.step(batch, lr, epoch)
            traces.append(trace)
            if on_step is not None:
                on_step(trace)
        trainer.epoch = epoch

        row = {
            'epoch': epoch,
            'loss': sum(trace.loss for trace in traces) / len(traces),
            'lr': traces[-1].lr,
            'wall_time': time.perf_counter() - started,
        }
        logger.info("[%s] epoch %d/%d loss %.6f lr %.6g", cfg.variant.value, epoch, cfg.epochs, row['loss'], row['lr'])
        if logs is not None:
            logs.metrics.append([row])
            logs.trace.append([
                {'epoch': t.epoch, 'step': t.step, 'loss': t.loss, 'lr': t.lr} for t in traces
            ])
            save_checkpoint(trainer.checkpoint(config_hash), out_dir / CHECKPOINT_NAME)
        if on_epoch is not None:
            on_epoch(row)

    return trainer.checkpoint(config_hash)


def pretrain_simclr(manifest: Manifest, cfg: PretrainConfig, **kwargs) -> Checkpoint:
    if cfg.variant not in SimCLRTrainer.variants:
        raise ValueError(f"pretrain_simclr cannot run variant '{cfg.variant.value}'")
    return pretrain(manifest, cfg, **kwargs)


def pretrain_moco(manifest: Manifest, cfg: PretrainConfig, **kwargs) -> Checkpoint:
    if cfg.variant not in MoCoTrainer.variants:
        raise ValueError(f"pretrain_moco cannot run variant '{cfg.variant.value}'")
    return pretrain(manifest, cfg, **kwargs)
