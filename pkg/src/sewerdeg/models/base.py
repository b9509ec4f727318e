"""Shared classifier interface."""

from __future__ import annotations

from typing import ClassVar

import numpy as np

from sewerdeg.data_model import FeatureMatrix
from sewerdeg.errors import ValidationError


def sigmoid(z):
    """Logistic function without overflow for large ``|z|``."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def as_xy(X, y=None):
    """Unpack a FeatureMatrix or arrays into ``(X, y, columns)``."""
    if isinstance(X, FeatureMatrix):
        return X.X, (X.y if y is None else np.asarray(y)), X.columns
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError(f"expected a 2-D design matrix, got shape {X.shape}")
    return X, (None if y is None else np.asarray(y)), tuple(f"x{j}" for j in range(X.shape[1]))


def check_binary(y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or not np.all((y == 0) | (y == 1)):
        raise ValidationError("labels must be a 1-D vector of 0/1")
    return y.astype(np.float64)


class Classifier:
    """Fitted probabilistic binary classifier.

    Subclasses set ``name`` and implement ``_proba`` on a validated array.
    """

    name: ClassVar[str] = ""
    columns: tuple[str, ...]
    seed: int | None = None

    def _check(self, X) -> np.ndarray:
        if isinstance(X, FeatureMatrix):
            if tuple(X.columns) != tuple(self.columns):
                raise ValidationError(
                    f"schema mismatch: model trained on {list(self.columns)}, got {list(X.columns)}"
                )
            return X.X
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.columns):
            raise ValidationError(f"schema mismatch: expected {len(self.columns)} features, got {X.shape[1]}")
        return X

    def predict_proba(self, X) -> np.ndarray:
        return np.clip(self._proba(self._check(X)), 0.0, 1.0)

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(np.int64)

    def _proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError
