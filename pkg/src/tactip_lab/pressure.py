"""Pressure estimation from marker displacement fields."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import isotonic_regression

from .imagery import FormatError, ParameterError
from .ridge import ridge_fit
from .tracking import DEFAULT_ALPHA, MARKER_COUNT, MODEL_MAGIC, DataError, VectorField

PRESSURE_SURFACES = ("hard", "soft")


class FitError(ValueError):
    """Training data cannot determine a model."""


@dataclass
class PressureSample:
    vectors: VectorField
    pressure: float
    surface: str = "hard"

    def __post_init__(self):
        if self.pressure < 0:
            raise ParameterError("pressure must be >= 0")
        if self.surface not in PRESSURE_SURFACES:
            raise ParameterError(f"surface must be one of {PRESSURE_SURFACES}")


@dataclass
class RidgePressureModel:
    weights: np.ndarray  # (2 * marker_count,)
    bias: float
    alpha: float

    @property
    def marker_count(self) -> int:
        return len(self.weights) // 2


def magnitude_sum(field: VectorField) -> float:
    """Total displacement length over all vectors."""
    if field.count == 0:
        return 0.0
    d = field.displacements
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def train_pressure_model(samples: list[PressureSample], alpha: float = DEFAULT_ALPHA,
                         marker_count: int = MARKER_COUNT) -> RidgePressureModel:
    if len(samples) < 2:
        raise FitError("need at least two samples")
    if alpha <= 0:
        raise ParameterError("alpha must be > 0")
    for i, s in enumerate(samples):
        if s.vectors.count != marker_count:
            raise DataError(f"sample {i} has {s.vectors.count} vectors, expected {marker_count}")
    y = np.array([s.pressure for s in samples])
    if np.unique(y).size < 2:
        raise FitError("pressures must take at least two distinct values")
    X = np.stack([s.vectors.flat() for s in samples])
    if np.ptp(X, axis=0).max() == 0:
        raise FitError("all displacement fields are identical")
    w, b = ridge_fit(X, y, alpha)
    return RidgePressureModel(w, float(b), float(alpha))


def predict_pressure_raw(model: RidgePressureModel, field: VectorField) -> float:
    if field.count != model.marker_count:
        raise ParameterError(f"field has {field.count} vectors, model expects {model.marker_count}")
    return float(field.flat() @ model.weights + model.bias)


def predict_pressure(model: RidgePressureModel, field: VectorField) -> float:
    """Predicted force, clamped at zero."""
    return max(0.0, predict_pressure_raw(model, field))


class MonotoneCalibration:
    """Best non-decreasing map from magnitude sum to pressure (isotonic least squares)."""

    def __init__(self, magnitudes, pressures):
        m = np.asarray(magnitudes, dtype=float)
        p = np.asarray(pressures, dtype=float)
        if m.size < 2:
            raise FitError("need at least two samples")
        order = np.argsort(m, kind="stable")
        self.x = m[order]
        self.y = isotonic_regression(p[order]).x

    def __call__(self, magnitudes) -> np.ndarray:
        return np.interp(np.asarray(magnitudes, dtype=float), self.x, self.y)


def mean_absolute_error(pred, true) -> float:
    return float(np.mean(np.abs(np.asarray(pred, dtype=float) - np.asarray(true, dtype=float))))


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def write_pressure_dataset(path: str | Path, samples: list[PressureSample]) -> None:
    """Lines of ``pressure surface v0x v0y ... vNx vNy``."""
    with open(path, "w") as fh:
        for s in samples:
            vec = " ".join(f"{v:.6f}" for v in s.vectors.flat())
            fh.write(f"{s.pressure:.6f} {s.surface} {vec}\n")


def read_pressure_dataset(path: str | Path, origins: np.ndarray | None = None,
                          marker_count: int = MARKER_COUNT) -> list[PressureSample]:
    """Read a pressure dataset; ``origins`` (defaults to zeros) anchors the vectors."""
    if origins is None:
        origins = np.zeros((marker_count, 2))
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2 + 2 * marker_count:
                raise DataError(f"{path}:{lineno}: expected {2 + 2 * marker_count} fields, got {len(parts)}")
            try:
                disp = np.array(parts[2:], dtype=float)
                out.append(PressureSample(VectorField.from_displacements(origins, disp), float(parts[0]), parts[1]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return out


def save_pressure_model(path: str | Path, model: RidgePressureModel) -> None:
    """Same TACR layout as the marker model, with a single output column."""
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<dII", model.alpha, len(model.weights), 1))
        fh.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())
        fh.write(struct.pack("<d", model.bias))


def load_pressure_model(path: str | Path) -> RidgePressureModel:
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}", 0)
    if len(raw) < 20:
        raise FormatError(f"{path}: truncated header", len(raw))
    alpha, n, outputs = struct.unpack_from("<dII", raw, 4)
    if outputs != 1:
        raise FormatError(f"{path}: pressure model must have one output, found {outputs}", 16)
    need = 20 + 8 * (n + 1)
    if len(raw) != need:
        raise FormatError(f"{path}: expected {need} bytes, found {len(raw)}", min(len(raw), need))
    body = np.frombuffer(raw, dtype="<f8", offset=20)
    return RidgePressureModel(body[:n].copy(), float(body[n]), alpha)
