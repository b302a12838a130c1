"""Deterministic synthetic camouflage samples: texture, mask, and sketch.

The background is seeded value noise; the object is a union of overlapping
disks whose interior texture is biased by a small contrast delta so the
object blends into the background (delta=0 makes it invisible).  The sketch
is the mask boundary run through the augmentation pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .augment import AugmentConfig, augment
from .errors import ParameterError
from .losses import extract_boundary
from .raster import check_mask


@dataclass(frozen=True)
class SynthConfig:
    height: int = 128
    width: int = 128
    blob_count: int = 3
    contrast: float = 0.1
    noise_scale: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.height < 32 or self.width < 32:
            raise ParameterError("dimensions must be >= 32")
        if self.blob_count < 1:
            raise ParameterError("blob_count must be >= 1")
        if not (0.0 <= self.contrast <= 0.5):
            raise ParameterError("contrast must lie in [0, 0.5]")
        if self.noise_scale < 1:
            raise ParameterError("noise_scale must be >= 1")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))


def value_noise(height: int, width: int, scale: int, rng: np.random.Generator) -> np.ndarray:
    """Bilinearly interpolated random lattice with spacing ``scale`` pixels."""
    gh = height // scale + 2
    gw = width // scale + 2
    lattice = rng.random((gh, gw))
    ys = np.arange(height) / scale
    xs = np.arange(width) / scale
    y0 = ys.astype(int)
    x0 = xs.astype(int)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    tl = lattice[np.ix_(y0, x0)]
    tr = lattice[np.ix_(y0, x0 + 1)]
    bl = lattice[np.ix_(y0 + 1, x0)]
    br = lattice[np.ix_(y0 + 1, x0 + 1)]
    top = tl * (1 - fx) + tr * fx
    bot = bl * (1 - fx) + br * fx
    return top * (1 - fy) + bot * fy


def _blob_mask(config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    h, w = config.height, config.width
    short = min(h, w)
    r_lo, r_hi = short / 6.0, short / 4.0
    yy, xx = np.mgrid[0:h, 0:w]
    mask = np.zeros((h, w), dtype=bool)
    r0 = rng.uniform(r_lo, r_hi)
    cy0 = rng.uniform(r_hi, h - r_hi)
    cx0 = rng.uniform(r_hi, w - r_hi)
    mask |= (yy - cy0) ** 2 + (xx - cx0) ** 2 <= r0 ** 2
    for _ in range(config.blob_count - 1):
        # overlap the first blob so the object stays one connected region
        r = rng.uniform(r_lo * 0.6, r_hi * 0.8)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        dist = rng.uniform(0.0, r0)
        cy = np.clip(cy0 + dist * math.sin(angle), r, h - r)
        cx = np.clip(cx0 + dist * math.cos(angle), r, w - r)
        mask |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r ** 2
    return mask


def mask_boundary(mask, theta: int = 3) -> np.ndarray:
    """Inner boundary ring of a binary mask (degenerate Canny on binary input)."""
    arr = check_mask(mask)
    return extract_boundary(arr.astype(np.float64), theta) > 0.5


def gt_sketch(mask, config: AugmentConfig = AugmentConfig()) -> np.ndarray:
    """Boundary of the gt mask fed through sketch augmentation.

    With K=0 this is the clean contour sketch (refit, unperturbed).
    """
    arr = check_mask(mask)
    if not arr.any():
        raise ParameterError("cannot derive a sketch from an empty mask")
    return augment(mask_boundary(arr), config).raster


@dataclass(frozen=True)
class SynthSample:
    image: np.ndarray  # float map in [0, 1], float32-exact for PF32 round trips
    mask: np.ndarray
    sketch: np.ndarray


def gen_sample(config: SynthConfig = SynthConfig(),
               augment_config: AugmentConfig | None = None) -> SynthSample:
    """Generate one (image, mask, sketch) triple, pure in the configs."""
    rng = _rng(config.seed)
    texture = value_noise(config.height, config.width, config.noise_scale, rng)
    mask = _blob_mask(config, rng)
    image = np.clip(texture + config.contrast * mask, 0.0, 1.0)
    image = image.astype(np.float32).astype(np.float64)  # match on-disk precision
    if augment_config is None:
        augment_config = AugmentConfig(seed=config.seed)
    sketch = gt_sketch(mask, augment_config)
    return SynthSample(image=image, mask=mask, sketch=sketch)
