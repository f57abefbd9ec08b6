"""
Checkpoint archive and encoder transfer.

A checkpoint is a zip archive holding `metadata.json` (UTF-8, sorted keys)
and one raw little-endian float32 file per named array under `arrays/`.
Entries are stored uncompressed with a fixed timestamp in sorted name
order, so identical contents always produce identical bytes.

Array name prefixes:
    encoder.*          pretrained encoder, the part transferred to U-Nets
    head.*             projection head (never transferred)
    key.*              momentum key network
    queue.vectors      dictionary ring buffer
    optim.momentum.*   SGD momentum buffers, for exact resume
"""
from __future__ import annotations

import json
import logging
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import torch
from torch import nn

from .specs import EncoderSpec

logger = logging.getLogger(__name__)

ARRAY_DTYPE = np.dtype('<f4')
ENCODER_PREFIX = 'encoder.'
METADATA_NAME = 'metadata.json'
ARRAY_DIR = 'arrays/'
FIXED_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass
class Checkpoint:
    arrays: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.arrays = {
            name: np.ascontiguousarray(np.asarray(array, dtype=ARRAY_DTYPE))
            for name, array in self.arrays.items()
        }
        self.metadata = dict(self.metadata)
        self.metadata['shapes'] = {
            name: list(array.shape) for name, array in sorted(self.arrays.items())
        }

    @property
    def shapes(self) -> dict[str, list[int]]:
        return self.metadata['shapes']

    @property
    def encoder_spec(self) -> EncoderSpec:
        if 'encoder_spec' not in self.metadata:
            raise ValueError("Checkpoint metadata has no encoder_spec")
        return EncoderSpec.from_dict(self.metadata['encoder_spec'])

    @property
    def epoch(self) -> int:
        return int(self.metadata.get('epoch', 0))

    def with_prefix(self, prefix: str) -> dict[str, np.ndarray]:
        """Arrays under `prefix`, with the prefix stripped."""
        return {
            name[len(prefix):]: array
            for name, array in self.arrays.items() if name.startswith(prefix)
        }


def state_arrays(module: nn.Module, prefix: str) -> dict[str, np.ndarray]:
    """Floating-point state of a module as named float32 arrays."""
    return {
        f'{prefix}{name}': tensor.detach().cpu().numpy().astype(ARRAY_DTYPE)
        for name, tensor in module.state_dict().items()
        if torch.is_floating_point(tensor)
    }


def load_state_arrays(module: nn.Module, arrays: Mapping[str, np.ndarray]) -> nn.Module:
    """Copy arrays into a module; names and shapes must match exactly."""
    state = module.state_dict()
    floating = {name for name, tensor in state.items() if torch.is_floating_point(tensor)}
    if floating != set(arrays):
        difference = sorted(floating ^ set(arrays))
        raise ValueError(f"Checkpoint arrays do not match the network: {difference[:5]}")
    with torch.no_grad():
        for name in floating:
            source = torch.from_numpy(np.asarray(arrays[name], dtype=ARRAY_DTYPE))
            if tuple(source.shape) != tuple(state[name].shape):
                raise ValueError(
                    f"Shape mismatch for '{name}': checkpoint {tuple(source.shape)}, "
                    f"network {tuple(state[name].shape)}"
                )
            state[name].copy_(source)
    return module


def _entry(name: str) -> zipfile.ZipInfo:
    info = zipfile.ZipInfo(name, date_time=FIXED_DATE)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    return info


def save_checkpoint(checkpoint: Checkpoint, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metadata = json.dumps(checkpoint.metadata, sort_keys=True, indent=2, ensure_ascii=False)
    with zipfile.ZipFile(path, 'w') as archive:
        archive.writestr(_entry(METADATA_NAME), metadata.encode('utf-8'))
        for name in sorted(checkpoint.arrays):
            archive.writestr(_entry(ARRAY_DIR + name + '.bin'), checkpoint.arrays[name].tobytes())
    logger.info("Saved checkpoint %s (%d arrays)", path, len(checkpoint.arrays))
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    with zipfile.ZipFile(path) as archive:
        metadata = json.loads(archive.read(METADATA_NAME).decode('utf-8'))
        arrays = {}
        for name, shape in metadata.get('shapes', {}).items():
            raw = archive.read(ARRAY_DIR + name + '.bin')
            arrays[name] = np.frombuffer(raw, dtype=ARRAY_DTYPE).reshape(shape).copy()
    return Checkpoint(arrays, metadata)


@dataclass(frozen=True)
class TransferReport:
    copied: tuple[str, ...]
    skipped: tuple[str, ...]
    untouched: tuple[str, ...]

    def summary(self) -> str:
        return (
            f"{len(self.copied)} copied, {len(self.skipped)} skipped, "
            f"{len(self.untouched)} left at initialization"
        )


def transfer_encoder(checkpoint: Checkpoint, net: nn.Module) -> tuple[nn.Module, TransferReport]:
    """
    Initialize `net.encoder` from the checkpoint's `encoder.*` arrays.

    Arrays are matched by name and shape; everything else in the checkpoint
    (projection head, key network, queue, optimizer state) is skipped and
    the rest of the network keeps its fresh initialization.
    """
    spec = checkpoint.encoder_spec
    target = getattr(net, 'spec', None)
    if target is not None and spec.variant != target.variant:
        raise ValueError(
            f"Checkpoint encoder variant '{spec.variant.value}' does not match "
            f"network variant '{target.variant.value}'"
        )

    state = net.state_dict()
    copied, skipped = [], []
    with torch.no_grad():
        for name, array in sorted(checkpoint.arrays.items()):
            if name.startswith(ENCODER_PREFIX) and name in state and tuple(state[name].shape) == array.shape:
                state[name].copy_(torch.from_numpy(array))
                copied.append(name)
            else:
                skipped.append(name)
    if not copied:
        raise ValueError("No checkpoint array matches the network encoder")

    untouched = sorted(
        name for name, tensor in state.items()
        if torch.is_floating_point(tensor) and name not in set(copied)
    )
    report = TransferReport(tuple(copied), tuple(skipped), tuple(untouched))
    logger.info("Encoder transfer: %s", report.summary())
    return net, report
