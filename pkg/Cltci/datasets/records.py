"""
Image records and manifests.

A manifest lists one image per line together with the patient it belongs to.
Patient identity is what the contrastive objective uses to decide positives,
so the grouping index is built once at load time and never mutated.
"""
from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional

import pandas as pd
from rest_framework import serializers

logger = logging.getLogger(__name__)

MANIFEST_FIELDS = ['image_id', 'patient_id', 'image_path', 'mask_path', 'timestamp_index']
REQUIRED_FIELDS = ['image_id', 'patient_id', 'image_path']


@dataclass(frozen=True)
class ImageRecord:
    """One image with its patient identity and optional ground-truth mask."""

    image_id: str
    patient_id: str
    image_path: Path
    mask_path: Optional[Path] = None
    timestamp_index: Optional[int] = None

    @property
    def has_mask(self) -> bool:
        return self.mask_path is not None

    def sort_key(self):
        """Order within a patient: acquisition index first, then id."""
        index = self.timestamp_index if self.timestamp_index is not None else -1
        return (index, self.image_id)


@dataclass(frozen=True)
class Manifest:
    """
    Immutable, validated collection of image records.

    `num_patients` and the per-patient grouping are derived from the
    records; every patient present has at least one record by construction.
    """

    records: tuple[ImageRecord, ...]
    source: Optional[Path] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'records', tuple(self.records))
        seen = set()
        for record in self.records:
            if record.image_id in seen:
                raise serializers.ValidationError(
                    {'image_id': f"Duplicate image_id '{record.image_id}'."}
                )
            seen.add(record.image_id)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @cached_property
    def by_patient(self) -> dict[str, tuple[ImageRecord, ...]]:
        """Grouping index: patient_id -> records sorted by acquisition order."""
        groups = defaultdict(list)
        for record in self.records:
            groups[record.patient_id].append(record)
        return {
            patient_id: tuple(sorted(group, key=ImageRecord.sort_key))
            for patient_id, group in sorted(groups.items())
        }

    @property
    def patient_ids(self) -> list[str]:
        return list(self.by_patient)

    @property
    def num_patients(self) -> int:
        return len(self.by_patient)

    @cached_property
    def index(self) -> dict[str, int]:
        """image_id -> position in `records`."""
        return {record.image_id: position for position, record in enumerate(self.records)}

    def get(self, image_id: str) -> ImageRecord:
        return self.records[self.index[image_id]]

    def annotated(self) -> 'Manifest':
        """Records that carry a ground-truth mask."""
        return Manifest(tuple(r for r in self.records if r.has_mask), source=self.source)

    def subset(self, image_ids: Iterable[str]) -> 'Manifest':
        """Records with the given ids, in the given order."""
        return Manifest(tuple(self.get(image_id) for image_id in image_ids), source=self.source)


def _detect_separator(header_line: str) -> str:
    if '\t' in header_line:
        return '\t'
    if ',' in header_line:
        return ','
    raise serializers.ValidationError(
        {'header': "Manifest header must be tab- or comma-separated."}
    )


def load_manifest(path) -> Manifest:
    """
    Read and validate a manifest file.

    The header line declares the fields and the separator (tab or comma).
    Relative image and mask paths are resolved against the manifest's
    directory. Raises ValidationError on duplicate ids, missing columns or
    missing files (every offender is listed).
    """
    from .serializers import ImageRecordSerializer

    path = Path(path)
    if not path.is_file():
        raise serializers.ValidationError({'manifest': f"Manifest not found: {path}"})

    with open(path, encoding='utf-8') as handle:
        header = handle.readline().rstrip('\r\n')
    separator = _detect_separator(header)

    frame = pd.read_csv(
        path, sep=separator, dtype=str, keep_default_na=False, encoding='utf-8'
    )
    frame.columns = [column.strip() for column in frame.columns]

    missing_columns = [name for name in REQUIRED_FIELDS if name not in frame.columns]
    if missing_columns:
        raise serializers.ValidationError(
            {name: "Column missing from manifest header." for name in missing_columns}
        )

    rows = []
    for row in frame.to_dict(orient='records'):
        row = {key: value.strip() for key, value in row.items() if key in MANIFEST_FIELDS}
        for optional in ('mask_path', 'timestamp_index'):
            if row.get(optional, '') == '':
                row.pop(optional, None)
        rows.append(row)

    serializer = ImageRecordSerializer(
        data=rows, many=True, context={'base_dir': path.parent}
    )
    if not serializer.is_valid():
        offenders = {
            rows[position].get('image_id', f'line {position + 2}'): errors
            for position, errors in enumerate(serializer.errors) if errors
        }
        raise serializers.ValidationError(offenders)

    records = serializer.save()

    counts = Counter(record.image_id for record in records)
    duplicates = sorted(image_id for image_id, count in counts.items() if count > 1)
    if duplicates:
        raise serializers.ValidationError(
            {'image_id': [f"Duplicate image_id '{image_id}'." for image_id in duplicates]}
        )

    missing_files = sorted(
        str(p) for record in records
        for p in (record.image_path, record.mask_path)
        if p is not None and not p.is_file()
    )
    if missing_files:
        raise serializers.ValidationError({'missing_files': missing_files})

    manifest = Manifest(tuple(records), source=path)
    logger.info(
        "Loaded manifest %s: %d records, %d patients",
        path, len(manifest), manifest.num_patients
    )
    return manifest


def write_manifest(manifest: Manifest, path, separator: str = ',') -> Path:
    """Write a manifest with paths relative to its directory when possible."""
    path = Path(path)
    base = path.parent.resolve()

    def relative(p: Optional[Path]) -> str:
        if p is None:
            return ''
        resolved = Path(p).resolve()
        try:
            return resolved.relative_to(base).as_posix()
        except ValueError:
            return str(resolved)

    frame = pd.DataFrame([
        {
            'image_id': record.image_id,
            'patient_id': record.patient_id,
            'image_path': relative(record.image_path),
            'mask_path': relative(record.mask_path),
            'timestamp_index': '' if record.timestamp_index is None else str(record.timestamp_index),
        }
        for record in manifest.records
    ], columns=MANIFEST_FIELDS)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep=separator, index=False, lineterminator='\n')
    return path
