"""scikit-learn compatible wrappers around the augmentation pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .augment import AugmentConfig, augment
from .raster import check_mask


class SketchAugmenter(BaseEstimator, TransformerMixin):
    """Stateless transformer: binary sketch rasters in, augmented rasters out.

    ``transform`` accepts a single (H, W) boolean array or an iterable of
    them and returns the same structure.  Augmentation of sample ``i`` uses
    the RNG stream derived from ``(seed, i)``, so results are independent of
    batch composition and ordering.
    """

    def __init__(self, n: int = 64, C: int = 64, K: float = 8.0,
                 min_pixels: int = 8, thickness: int = 1, seed: int = 0,
                 perturb_endpoints: bool = False):
        self.n = n
        self.C = C
        self.K = K
        self.min_pixels = min_pixels
        self.thickness = thickness
        self.seed = seed
        self.perturb_endpoints = perturb_endpoints

    def _config(self, sample_seed: int) -> AugmentConfig:
        return AugmentConfig(n=self.n, C=self.C, K=self.K,
                             min_pixels=self.min_pixels, thickness=self.thickness,
                             seed=sample_seed, perturb_endpoints=self.perturb_endpoints)

    def fit(self, X=None, y=None):
        self._config(self.seed)  # parameter validation
        self.fitted_ = True
        return self

    def transform(self, X):
        if not getattr(self, "fitted_", False):
            raise NotFittedError("call fit before transform")
        single = isinstance(X, np.ndarray) and X.ndim == 2
        batch = [X] if single else list(X)
        out = []
        for i, sketch in enumerate(batch):
            sample_seed = int(np.random.SeedSequence([self.seed, i]).generate_state(1)[0])
            out.append(augment(check_mask(sketch), self._config(sample_seed)).raster)
        return out[0] if single else out
