"""
Run configuration: YAML file, command-line overrides, validation, hashing.

A run is configured by one YAML mapping whose sections mirror the apps
(`synthetic`, `preprocess`, `pretrain`, `finetune`, `eval`) plus `paths`
and the run `seed`. Command-line flags are applied as dotted-key
overrides before validation, so the resolved configuration written next
to the artifacts is the one that produced them.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional

from omegaconf import OmegaConf
from rest_framework import serializers

from Cltci.datasets.preprocessing import PreprocessConfig
from Cltci.datasets.synthetic import MANIFEST_NAME, SyntheticConfig
from Cltci.evaluation.serializers import EvalConfig
from Cltci.training.config import FinetuneConfig, PretrainConfig

CONFIG_FILE = 'config.yaml'
HASH_FILE = 'config_hash.txt'


@dataclass(frozen=True)
class PathsConfig:
    data_dir: str = 'data/synthetic'
    manifest: Optional[str] = None
    finetune_manifest: Optional[str] = None
    checkpoint: Optional[str] = None
    out_dir: Optional[str] = None

    @property
    def pretrain_manifest_path(self) -> Path:
        return Path(self.manifest) if self.manifest else Path(self.data_dir) / MANIFEST_NAME

    @property
    def finetune_manifest_path(self) -> Path:
        return Path(self.finetune_manifest) if self.finetune_manifest else self.pretrain_manifest_path


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    finetune: FinetuneConfig = field(default_factory=FinetuneConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


def apply_overrides(raw: dict, overrides: Optional[Mapping[str, Any]]) -> dict:
    """Set dotted keys (`pretrain.variant`) on a nested mapping; None values are skipped."""
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        *parents, leaf = dotted.split('.')
        node = raw
        for key in parents:
            child = node.get(key)
            if not isinstance(child, dict):
                child = node[key] = {}
            node = child
        node[leaf] = value
    return raw


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise serializers.ValidationError({'config': f"Configuration file '{path}' does not exist."})
    raw = OmegaConf.to_container(OmegaConf.load(path), resolve=True)
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise serializers.ValidationError({'config': f"'{path}' must contain a mapping."})
    return raw


def load_run_config(path=None, overrides: Optional[Mapping[str, Any]] = None) -> tuple[RunConfig, dict]:
    """
    Validated RunConfig and its resolved plain form.

    Raises ValidationError for unknown keys, bad values and inconsistent
    sections.
    """
    from .serializers import RunConfigSerializer

    raw = read_config_file(path) if path else {}
    raw = apply_overrides(raw, overrides)
    serializer = RunConfigSerializer(data=raw)
    serializer.is_valid(raise_exception=True)
    cfg = serializer.save()
    return cfg, to_plain(cfg)


def to_plain(value):
    """Dataclasses, enums, paths and tuples as JSON-compatible values."""
    if is_dataclass(value):
        return {f.name: to_plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    if isinstance(value, dict):
        return {str(key): to_plain(item) for key, item in value.items()}
    return value


def config_hash(resolved: Mapping) -> str:
    """SHA-256 of the canonical JSON form of a resolved configuration."""
    canonical = json.dumps(resolved, sort_keys=True, separators=(',', ':'), allow_nan=False)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def write_run_files(out_dir, resolved: Mapping, digest: Optional[str] = None) -> str:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = digest or config_hash(resolved)
    OmegaConf.save(OmegaConf.create(dict(resolved)), out_dir / CONFIG_FILE)
    (out_dir / HASH_FILE).write_text(digest + '\n')
    return digest
