"""scikit-learn adapter for the directional maximal transform."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .maximal import DirectionSet, RasterImage, maximal_transform, raster_shape


class DirectionalMaximalTransformer(TransformerMixin, BaseEstimator):
    """Apply the maximal transform to flattened rasters, one image per row.

    Parameters
    ----------
    slopes : sequence of rationals in [0, 1]
    m : raster resolution; rows of ``X`` have ``3 * 4**m`` entries
    lengths : segment half-lengths, default every dyadic length
    """

    def __init__(self, slopes=(0,), m: int = 5, lengths=None):
        self.slopes = slopes
        self.m = m
        self.lengths = lengths

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        rows, cols = raster_shape(self.m)
        if X.shape[1] != rows * cols:
            raise ValueError(f"expected {rows * cols} features for m={self.m}, got {X.shape[1]}")
        self.omega_ = DirectionSet(tuple(Fraction(s) for s in self.slopes))
        if len(self.omega_) == 0:
            raise ValueError("slopes must be nonempty")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "omega_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        shape = raster_shape(self.m)
        out = np.empty_like(X)
        for i, row in enumerate(X):
            img = RasterImage(self.m, row.reshape(shape))
            out[i] = maximal_transform(img, self.omega_, self.lengths).values.ravel()
        return out
