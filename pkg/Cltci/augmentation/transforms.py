"""
Stochastic views for pretraining and paired image/mask transforms.

One random similarity transform (rotation, scale, translation about the
image centre) is drawn per call. Regions moved in from outside the frame are
filled with the pad value. All randomness comes from the rng_state argument,
so a view is reproducible from its seed alone, whichever worker computes it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from skimage import transform

from Cltci.datasets.sampling import as_generator


@dataclass(frozen=True)
class AugmentConfig:
    rotation_degrees: tuple[float, float] = (-10.0, 10.0)
    translation_fraction: tuple[float, float] = (-0.10, 0.10)
    scale: tuple[float, float] = (0.9, 1.1)
    horizontal_flip_prob: float = 0.5
    intensity_jitter: float = 0.1
    pad_value: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ('rotation_degrees', 'translation_fraction', 'scale'):
            low, high = getattr(self, name)
            if not (math.isfinite(low) and math.isfinite(high)) or low > high:
                raise ValueError(f"{name} must be a finite [low, high] range")
            object.__setattr__(self, name, (float(low), float(high)))
        if self.scale[0] <= 0:
            raise ValueError("scale range must be positive")
        if not 0.0 <= self.horizontal_flip_prob <= 1.0:
            raise ValueError("horizontal_flip_prob must be in [0, 1]")
        if self.intensity_jitter < 0:
            raise ValueError("intensity_jitter must be non-negative")

    @classmethod
    def pretraining(cls, **overrides) -> 'AugmentConfig':
        return cls(**overrides)

    @classmethod
    def finetuning(cls, **overrides) -> 'AugmentConfig':
        overrides.setdefault('horizontal_flip_prob', 0.0)
        overrides.setdefault('intensity_jitter', 0.0)
        return cls(**overrides)

    @classmethod
    def identity(cls, **overrides) -> 'AugmentConfig':
        values = dict(
            rotation_degrees=(0.0, 0.0), translation_fraction=(0.0, 0.0),
            scale=(1.0, 1.0), horizontal_flip_prob=0.0, intensity_jitter=0.0,
        )
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class AffineParams:
    """Concrete transform parameters; translation is (tx, ty) in pixels."""

    rotation_degrees: float = 0.0
    translation: tuple[float, float] = (0.0, 0.0)
    scale: float = 1.0
    flip: bool = False
    contrast: float = 1.0
    brightness: float = 0.0

    @property
    def is_geometric_identity(self) -> bool:
        return (
            self.rotation_degrees == 0.0 and self.scale == 1.0
            and self.translation == (0.0, 0.0)
        )

    def matrix(self, size: int) -> np.ndarray:
        """
        Forward 3x3 map from input (x, y) to output (x, y) coordinates.

        Rotation and scale act about the pixel-centre of the image; entries
        within 1e-12 of zero are snapped so right-angle rotations are exact.
        """
        theta = math.radians(self.rotation_degrees)
        cos, sin = math.cos(theta), math.sin(theta)
        cos = 0.0 if abs(cos) < 1e-12 else cos
        sin = 0.0 if abs(sin) < 1e-12 else sin
        a, b = self.scale * cos, -self.scale * sin
        c, d = self.scale * sin, self.scale * cos
        centre = (size - 1) / 2.0
        tx, ty = self.translation
        return np.array([
            [a, b, centre + tx - (a * centre + b * centre)],
            [c, d, centre + ty - (c * centre + d * centre)],
            [0.0, 0.0, 1.0],
        ])


def sample_affine(cfg: AugmentConfig, size: int, rng_state, allow_flip: bool = True) -> AffineParams:
    """Draw one parameter set. The number of draws is fixed, whatever the config."""
    rng = as_generator(rng_state)
    angle = rng.uniform(*cfg.rotation_degrees)
    tx = rng.uniform(*cfg.translation_fraction) * size
    ty = rng.uniform(*cfg.translation_fraction) * size
    scale = rng.uniform(*cfg.scale)
    flip = rng.random() < cfg.horizontal_flip_prob
    contrast = 1.0 + rng.uniform(-cfg.intensity_jitter, cfg.intensity_jitter)
    brightness = rng.uniform(-cfg.intensity_jitter, cfg.intensity_jitter)
    return AffineParams(
        rotation_degrees=float(angle),
        translation=(float(tx), float(ty)),
        scale=float(scale),
        flip=bool(flip) and allow_flip,
        contrast=float(contrast),
        brightness=float(brightness),
    )


def apply_affine(array: np.ndarray, params: AffineParams, order: int, fill: float = 0.0) -> np.ndarray:
    """
    Warp a square 2-D array with the geometric part of `params`.

    order=1 is bilinear (images), order=0 nearest-neighbour (label masks,
    which keep their dtype). Flip and intensity are not applied here.
    """
    array = np.asarray(array)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise ValueError(f"Expected a square 2-D array, got shape {array.shape}")
    if params.is_geometric_identity:
        return array.copy()
    tform = transform.AffineTransform(matrix=params.matrix(array.shape[0]))
    warped = transform.warp(
        array.astype(np.float64), tform.inverse, order=order,
        mode='constant', cval=fill, preserve_range=True,
    )
    if order == 0:
        return np.rint(warped).astype(array.dtype)
    return warped.astype(array.dtype if np.issubdtype(array.dtype, np.floating) else np.float32)


def augment_view(image: np.ndarray, cfg: AugmentConfig, rng_state) -> np.ndarray:
    """One stochastic view T(x): intensity jitter, affine warp, optional flip."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise ValueError(f"augment_view expects a square image, got {image.shape}")
    params = sample_affine(cfg, image.shape[0], rng_state)
    view = image
    if params.contrast != 1.0 or params.brightness != 0.0:
        view = (view * params.contrast + params.brightness).astype(np.float32)
    view = apply_affine(view, params, order=1, fill=cfg.pad_value)
    if params.flip:
        view = np.ascontiguousarray(view[:, ::-1])
    return view


def augment_pair(image: np.ndarray, mask: np.ndarray, cfg: AugmentConfig, rng_state) -> tuple[np.ndarray, np.ndarray]:
    """
    Apply one geometric transform to an image and its label mask.

    Horizontal flips are never applied: a flip would swap the left and
    right lung labels.
    """
    image = np.asarray(image, dtype=np.float32)
    mask = np.asarray(mask)
    if image.shape != mask.shape:
        raise ValueError(f"Image shape {image.shape} != mask shape {mask.shape}")
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise ValueError(f"augment_pair expects square arrays, got {image.shape}")
    params = sample_affine(cfg, image.shape[0], rng_state, allow_flip=False)
    if params.contrast != 1.0 or params.brightness != 0.0:
        image = (image * params.contrast + params.brightness).astype(np.float32)
    return (
        apply_affine(image, params, order=1, fill=cfg.pad_value),
        apply_affine(mask, params, order=0, fill=0),
    )


class TwoViewTransform:
    """
    Produce the two correlated views (T(x), T'(x)) of one image.

    Each view gets its own child seed spawned from the given state.
    """

    def __init__(self, cfg: AugmentConfig):
        self.cfg = cfg

    def __call__(self, image: np.ndarray, rng_state) -> tuple[np.ndarray, np.ndarray]:
        rng = as_generator(rng_state)
        first, second = rng.integers(0, 2**63 - 1, size=2)
        return (
            augment_view(image, self.cfg, int(first)),
            augment_view(image, self.cfg, int(second)),
        )
