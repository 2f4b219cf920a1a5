"""Marker correspondence, displacement vectors and the ridge marker localiser."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imagery import BinaryFrame, FormatError, MarkerSet, ParameterError, downsample
from .ridge import ridge_fit

MARKER_COUNT = 133
DEFAULT_ALPHA = 150.0
FEATURE_SIDE = 64
DEFAULT_MAX_DIST = 4.25  # half the simulator's rest spacing

MODEL_MAGIC = b"TACR"


class DataError(ValueError):
    """Inconsistent or unusable training data."""


@dataclass
class VectorField:
    """Displacements from origin points to matched current points."""

    origins: np.ndarray  # (n, 2)
    tips: np.ndarray  # (n, 2)

    def __post_init__(self):
        self.origins = np.asarray(self.origins, dtype=float).reshape(-1, 2)
        self.tips = np.asarray(self.tips, dtype=float).reshape(-1, 2)
        if self.origins.shape != self.tips.shape:
            raise ParameterError("origins and tips must have the same shape")

    @property
    def count(self) -> int:
        return len(self.origins)

    @property
    def displacements(self) -> np.ndarray:
        return self.tips - self.origins

    def flat(self) -> np.ndarray:
        """Displacements as [v0x, v0y, v1x, v1y, ...]."""
        return self.displacements.ravel()

    @classmethod
    def from_displacements(cls, origins, displacements) -> "VectorField":
        origins = np.asarray(origins, dtype=float).reshape(-1, 2)
        return cls(origins, origins + np.asarray(displacements, dtype=float).reshape(-1, 2))


@dataclass
class Assignment:
    pairs: list[tuple[int, int]]
    unmatched_origins: list[int] = field(default_factory=list)
    unmatched_currents: list[int] = field(default_factory=list)


def euclidean_distance(o, t) -> float:
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(o, t)))


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))


def match_points(origins: MarkerSet, currents: MarkerSet, max_dist: float = DEFAULT_MAX_DIST) -> Assignment:
    """Greedy global nearest-pair matching.

    Repeatedly pairs the closest still-free (origin, current) couple until the
    closest remaining distance exceeds ``max_dist``. Equal distances are
    resolved by the lower origin index, then the lower current index.
    """
    if max_dist <= 0:
        raise ParameterError("max_dist must be > 0")
    n, m = origins.count, currents.count
    pairs: list[tuple[int, int]] = []
    if n and m:
        d = pairwise_distances(origins.points, currents.points)
        oi, ci = np.nonzero(d <= max_dist)
        dist = d[oi, ci]
        used_o: set[int] = set()
        used_c: set[int] = set()
        # scanning candidates sorted by (distance, origin, current) and taking
        # the free ones reproduces the repeated-minimum procedure
        for k in np.lexsort((ci, oi, dist)):
            o, c = int(oi[k]), int(ci[k])
            if o in used_o or c in used_c:
                continue
            used_o.add(o)
            used_c.add(c)
            pairs.append((o, c))
    matched_o = {o for o, _ in pairs}
    matched_c = {c for _, c in pairs}
    return Assignment(
        pairs=pairs,
        unmatched_origins=[i for i in range(n) if i not in matched_o],
        unmatched_currents=[j for j in range(m) if j not in matched_c],
    )


def vector_field(origins: MarkerSet, currents: MarkerSet, assignment: Assignment) -> VectorField:
    if not assignment.pairs:
        return VectorField(np.zeros((0, 2)), np.zeros((0, 2)))
    idx = np.asarray(assignment.pairs, dtype=int)
    if idx[:, 0].max() >= origins.count or idx[:, 1].max() >= currents.count or idx.min() < 0:
        raise IndexError("assignment refers to points outside the marker sets")
    return VectorField(origins.points[idx[:, 0]], currents.points[idx[:, 1]])


def track(origins: MarkerSet, currents: MarkerSet, max_dist: float = DEFAULT_MAX_DIST) -> VectorField:
    """Match then build the displacement field in one call."""
    return vector_field(origins, currents, match_points(origins, currents, max_dist))


def average_vector(field: VectorField) -> tuple[float, float]:
    if field.count == 0:
        raise ParameterError("cannot average an empty vector field")
    mx, my = field.displacements.mean(axis=0)
    return float(mx), float(my)


# ---------------------------------------------------------------------------
# Ridge marker localiser
# ---------------------------------------------------------------------------

@dataclass
class AugmentSpec:
    """Random translation / central zoom applied to labelled training frames."""

    copies: int = 4
    max_shift: int = 10
    zoom_range: tuple[float, float] = (0.9, 1.1)
    seed: int = 0


@dataclass
class RidgeMarkerModel:
    weights: np.ndarray  # (feature_len, 2 * marker_count)
    bias: np.ndarray  # (2 * marker_count,)
    alpha: float
    feature_side: int = FEATURE_SIDE

    @property
    def feature_len(self) -> int:
        return self.weights.shape[0]

    @property
    def marker_count(self) -> int:
        return self.weights.shape[1] // 2


def marker_features(frame: BinaryFrame | np.ndarray, side: int = FEATURE_SIDE) -> np.ndarray:
    """Downsampled binary image, flattened (pixel-coverage per cell)."""
    bits = frame.bits if isinstance(frame, BinaryFrame) else np.asarray(frame)
    return downsample(bits, side).ravel()


def shift_frame(bits: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Integer translation; vacated pixels become background."""
    out = np.zeros_like(bits)
    h, w = bits.shape
    ys = slice(max(dy, 0), h + min(dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    yd = slice(max(-dy, 0), h + min(-dy, 0))
    xd = slice(max(-dx, 0), w + min(-dx, 0))
    out[ys, xs] = bits[yd, xd]
    return out


def zoom_frame(bits: np.ndarray, scale: float) -> np.ndarray:
    """Scale about the image centre (nearest-neighbour to keep it binary)."""
    h, w = bits.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    # output pixel p samples input pixel c + (p - c) / scale
    matrix = np.diag([1.0 / scale, 1.0 / scale])
    offset = np.array([cy, cx]) - matrix @ np.array([cy, cx])
    return ndimage.affine_transform(bits, matrix, offset=offset, order=0, mode="constant", cval=0)


def augment_samples(samples, spec: AugmentSpec):
    """Yield the originals plus ``spec.copies`` shifted/zoomed variants of each."""
    rng = np.random.default_rng(spec.seed)
    for bits, pts in samples:
        yield bits, pts
        h, w = bits.shape
        centre = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
        for _ in range(spec.copies):
            if rng.random() < 0.5:
                dx, dy = (int(v) for v in rng.integers(-spec.max_shift, spec.max_shift + 1, size=2))
                yield shift_frame(bits, dx, dy), pts + np.array([dx, dy], dtype=float)
            else:
                s = float(rng.uniform(*spec.zoom_range))
                yield zoom_frame(bits, s), centre + (pts - centre) * s


def train_marker_model(samples, alpha: float = DEFAULT_ALPHA, augment: AugmentSpec | None = None,
                       feature_side: int = FEATURE_SIDE, marker_count: int = MARKER_COUNT) -> RidgeMarkerModel:
    """Fit the fixed-count marker localiser.

    ``samples`` is an iterable of (BinaryFrame or bit array, (marker_count, 2) points).
    """
    samples = [(f.bits if isinstance(f, BinaryFrame) else np.asarray(f), np.asarray(p, dtype=float))
               for f, p in samples]
    if not samples:
        raise DataError("need at least one labelled frame")
    if alpha <= 0:
        raise ParameterError("alpha must be > 0")
    for i, (_, pts) in enumerate(samples):
        if pts.shape != (marker_count, 2):
            raise DataError(f"sample {i} has {pts.shape[0] if pts.ndim else 0} points, expected {marker_count}")
    if augment is not None:
        samples = list(augment_samples(samples, augment))
    X = np.stack([marker_features(b, feature_side) for b, _ in samples])
    Y = np.stack([p.ravel() for _, p in samples])
    w, b = ridge_fit(X, Y, alpha)
    return RidgeMarkerModel(w, b, float(alpha), feature_side)


def predict_markers(model: RidgeMarkerModel, frame: BinaryFrame | np.ndarray) -> MarkerSet:
    x = marker_features(frame, model.feature_side)
    if x.size != model.feature_len:
        raise ParameterError(f"frame yields {x.size} features, model expects {model.feature_len}")
    return MarkerSet((x @ model.weights + model.bias).reshape(-1, 2))


def save_marker_model(path: str | Path, model: RidgeMarkerModel) -> None:
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<dII", model.alpha, model.feature_len, model.weights.shape[1]))
        fh.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.bias, dtype="<f8").tobytes())


def load_marker_model(path: str | Path) -> RidgeMarkerModel:
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}", 0)
    if len(raw) < 20:
        raise FormatError(f"{path}: truncated header", len(raw))
    alpha, feature_len, outputs = struct.unpack_from("<dII", raw, 4)
    need = 20 + 8 * (feature_len * outputs + outputs)
    if len(raw) != need:
        raise FormatError(f"{path}: expected {need} bytes, found {len(raw)}", min(len(raw), need))
    body = np.frombuffer(raw, dtype="<f8", offset=20)
    weights = body[:feature_len * outputs].reshape(feature_len, outputs).copy()
    bias = body[feature_len * outputs:].copy()
    side = int(round(math.sqrt(feature_len)))
    if side * side != feature_len:
        raise FormatError(f"{path}: feature length {feature_len} is not a square grid", 8)
    return RidgeMarkerModel(weights, bias, alpha, side)


# ---------------------------------------------------------------------------
# Label files: "frame_index x0 y0 x1 y1 ..."
# ---------------------------------------------------------------------------

def write_marker_labels(path: str | Path, labels: dict[int, np.ndarray]) -> None:
    with open(path, "w") as fh:
        for idx in sorted(labels):
            coords = " ".join(f"{v:.6f}" for v in np.asarray(labels[idx]).ravel())
            fh.write(f"{idx} {coords}\n")


def read_marker_labels(path: str | Path, marker_count: int = MARKER_COUNT) -> dict[int, np.ndarray]:
    labels = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 1 + 2 * marker_count:
                raise DataError(f"{path}:{lineno}: expected {1 + 2 * marker_count} fields, got {len(parts)}")
            labels[int(parts[0])] = np.array(parts[1:], dtype=float).reshape(marker_count, 2)
    return labels
