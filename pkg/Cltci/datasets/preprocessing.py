"""
Deterministic preprocessing: pad to square, resize, normalize.

Images of arbitrary aspect ratio are squared by padding the shorter axis
(symmetrically, the odd pixel going to the trailing edge), then resized to
`target_size`. Images are resized bilinearly and normalized; masks are
resized with nearest-neighbour and never normalized, so no new label can
appear.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image
from skimage import transform


class Normalization(str, Enum):
    ZSCORE = 'zscore'
    MINMAX = 'minmax'


@dataclass(frozen=True)
class PreprocessConfig:
    target_size: int = 256
    pad_value: float = 0.0
    normalization: Normalization = Normalization.ZSCORE

    def __post_init__(self):
        if self.target_size <= 0:
            raise ValueError(f"target_size must be positive, got {self.target_size}")
        object.__setattr__(self, 'normalization', Normalization(self.normalization))


def square_padding(height: int, width: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """
    Pad widths ((top, bottom), (left, right)) that make an image square.

    The deficit is split evenly; when it is odd the extra pixel goes to the
    trailing edge (bottom or right).
    """
    deficit = abs(height - width)
    leading = deficit // 2
    trailing = deficit - leading
    if height < width:
        return (leading, trailing), (0, 0)
    if width < height:
        return (0, 0), (leading, trailing)
    return (0, 0), (0, 0)


def pad_to_square(array: np.ndarray, pad_value=0) -> np.ndarray:
    """Pad the shorter axis of a 2-D array with `pad_value`."""
    if array.ndim != 2:
        raise ValueError(f"Expected a 2-D array, got shape {array.shape}")
    if array.size == 0:
        raise ValueError("Cannot preprocess an empty image.")
    rows, cols = square_padding(*array.shape)
    if rows == (0, 0) and cols == (0, 0):
        return array
    return np.pad(array, (rows, cols), mode='constant', constant_values=pad_value)


def normalize(image: np.ndarray, normalization: Normalization) -> np.ndarray:
    image = image.astype(np.float32, copy=False)
    if normalization == Normalization.MINMAX:
        low, high = float(image.min()), float(image.max())
        if high > low:
            return ((image - low) / (high - low)).astype(np.float32)
        return np.zeros_like(image, dtype=np.float32)
    mean = float(image.mean())
    std = float(image.std())
    if std > 0:
        return ((image - mean) / std).astype(np.float32)
    return (image - mean).astype(np.float32)


def preprocess(image: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Square, resize (bilinear) and normalize one grayscale image."""
    image = np.asarray(image)
    if image.size == 0 or image.ndim != 2:
        raise ValueError(f"Cannot preprocess image of shape {image.shape}")
    squared = pad_to_square(image.astype(np.float64), cfg.pad_value)
    size = cfg.target_size
    if squared.shape != (size, size):
        squared = transform.resize(
            squared, (size, size), order=1, mode='edge',
            preserve_range=True, anti_aliasing=False,
        )
    return normalize(squared, cfg.normalization)


def preprocess_mask(mask: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Square (pad with background) and resize a label mask, nearest-neighbour."""
    mask = np.asarray(mask)
    if mask.size == 0 or mask.ndim != 2:
        raise ValueError(f"Cannot preprocess mask of shape {mask.shape}")
    squared = pad_to_square(mask, 0)
    size = cfg.target_size
    if squared.shape != (size, size):
        squared = transform.resize(
            squared, (size, size), order=0, mode='edge',
            preserve_range=True, anti_aliasing=False,
        )
    return np.rint(squared).astype(np.uint8)


def read_image(path) -> np.ndarray:
    """Read an 8- or 16-bit grayscale PNG/PGM as float32 intensities."""
    with Image.open(path) as handle:
        if handle.mode not in ('L', 'I;16', 'I;16B', 'I', 'F'):
            handle = handle.convert('L')
        return np.asarray(handle).astype(np.float32)


def read_mask(path) -> np.ndarray:
    """Read a label mask with raw label values."""
    with Image.open(path) as handle:
        return np.asarray(handle).astype(np.uint8)


def write_png(array: np.ndarray, path) -> Path:
    """Write a uint8 or uint16 2-D array as a grayscale PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    array = np.asarray(array)
    if array.dtype not in (np.uint8, np.uint16):
        raise ValueError(f"write_png expects uint8/uint16, got {array.dtype}")
    Image.fromarray(array).save(path, format='PNG')
    return path


def load_pair(record, cfg: PreprocessConfig) -> tuple[np.ndarray, np.ndarray | None]:
    """Preprocessed image and (if the record has one) mask."""
    raw = read_image(record.image_path)
    image = preprocess(raw, cfg)
    if record.mask_path is None:
        return image, None
    raw_mask = read_mask(record.mask_path)
    if raw_mask.shape != raw.shape:
        raise ValueError(
            f"Mask {record.mask_path} has shape {raw_mask.shape}, "
            f"image {record.image_path} has shape {raw.shape}"
        )
    return image, preprocess_mask(raw_mask, cfg)
