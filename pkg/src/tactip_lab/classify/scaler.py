from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imagery import ParameterError


@dataclass
class StandardScaler:
    """Per-feature z = (x - mean) / std, population std; constant features keep std 1."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, data) -> "StandardScaler":
        X = np.asarray(data, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        X = X.reshape(len(X), -1)
        if len(X) < 2:
            raise ParameterError("need at least two rows to fit a scaler")
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std[std == 0] = 1.0
        return cls(mean, std)

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        shape = x.shape
        flat = x.reshape(-1, self.mean.size)
        return ((flat - self.mean) / self.std).reshape(shape)

    def inverse_transform(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        shape = z.shape
        return (z.reshape(-1, self.mean.size) * self.std + self.mean).reshape(shape)


def fit_scaler(data) -> StandardScaler:
    return StandardScaler.fit(data)


def transform(scaler: StandardScaler, x) -> np.ndarray:
    return scaler.transform(x)
