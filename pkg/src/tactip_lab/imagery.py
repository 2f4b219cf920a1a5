"""Frame containers, adaptive thresholding, blob filtering and centroid extraction."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

# 4-connectivity structuring element
FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

DEFAULT_WINDOW = 31
DEFAULT_OFFSET = 10.0
DEFAULT_MAX_AREA = 100
DEFAULT_MIN_AREA = 4

CONTAINER_MAGIC = b"TACF"
CONTAINER_VERSION = 1
_HEADER = struct.Struct("<4sBHHI")


class ParameterError(ValueError):
    """Raised when an operation receives an out-of-range parameter."""


class FormatError(ValueError):
    """Raised when a file does not match its declared binary layout."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass
class GrayFrame:
    """8-bit grayscale image, stored as a (height, width) uint8 array."""

    data: np.ndarray
    timestamp: int = 0

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ParameterError(f"frame data must be a non-empty 2-D array, got shape {data.shape}")
        if data.dtype != np.uint8:
            data = np.clip(np.rint(data), 0, 255).astype(np.uint8)
        self.data = data
        if self.timestamp < 0:
            raise ParameterError("timestamp must be >= 0")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_bytes(cls, raw: bytes, width: int, height: int, timestamp: int = 0) -> "GrayFrame":
        if len(raw) != width * height:
            raise ParameterError(f"expected {width * height} bytes, got {len(raw)}")
        return cls(np.frombuffer(raw, dtype=np.uint8).reshape(height, width).copy(), timestamp)

    def to_bytes(self) -> bytes:
        return self.data.tobytes(order="C")


@dataclass
class BinaryFrame:
    """Thresholded image, a (height, width) uint8 array of {0, 1}."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ParameterError(f"binary frame must be 2-D, got shape {bits.shape}")
        self.bits = (bits != 0).astype(np.uint8)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def to_gray(self) -> GrayFrame:
        return GrayFrame(self.bits * np.uint8(255))


@dataclass
class Blob:
    pixel_indices: np.ndarray  # (area, 2) array of (x, y)
    area: int = field(init=False)
    centroid: tuple[float, float] = field(init=False)

    def __post_init__(self):
        self.pixel_indices = np.asarray(self.pixel_indices, dtype=int).reshape(-1, 2)
        self.area = len(self.pixel_indices)
        if self.area < 1:
            raise ParameterError("blob must contain at least one pixel")
        cx, cy = self.pixel_indices.mean(axis=0)
        self.centroid = (float(cx), float(cy))


@dataclass
class MarkerSet:
    """Ordered marker centroids in pixel coordinates, shape (count, 2) as (x, y)."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)

    @property
    def count(self) -> int:
        return len(self.points)

    def __len__(self) -> int:
        return self.count


def adaptive_threshold(frame: GrayFrame, window: int = DEFAULT_WINDOW, offset: float = DEFAULT_OFFSET) -> BinaryFrame:
    """Mark pixels brighter than their local window mean plus ``offset``.

    The window is centred on each pixel; pixels falling outside the frame
    are replaced by the nearest edge pixel.
    """
    if window % 2 == 0 or window < 3 or window > min(frame.width, frame.height):
        raise ParameterError(
            f"window must be odd and within [3, {min(frame.width, frame.height)}], got {window}"
        )
    img = frame.data.astype(np.float64)
    local_mean = ndimage.uniform_filter(img, size=window, mode="nearest")
    return BinaryFrame(img > local_mean + offset)


def label_components(frame: BinaryFrame) -> tuple[np.ndarray, int]:
    """4-connected component labels (0 = background) and the component count."""
    labels, n = ndimage.label(frame.bits, structure=FOUR_CONNECTED)
    return labels, n


def find_blobs(frame: BinaryFrame) -> list[Blob]:
    labels, _ = label_components(frame)
    out = []
    # find_objects yields bounding slices in label order
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        ys, xs = np.nonzero(labels[sl] == idx)
        ys = ys + sl[0].start
        xs = xs + sl[1].start
        out.append(Blob(np.column_stack([xs, ys])))
    return out


def remove_large_blobs(frame: BinaryFrame, max_area: int = DEFAULT_MAX_AREA) -> BinaryFrame:
    """Clear every component whose area exceeds ``max_area`` (glare reflections)."""
    if max_area < 1:
        raise ParameterError("max_area must be >= 1")
    labels, n = label_components(frame)
    if n == 0:
        return BinaryFrame(frame.bits.copy())
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    too_big = areas > max_area
    too_big[0] = False
    out = frame.bits.copy()
    out[too_big[labels]] = 0
    return BinaryFrame(out)


def extract_centroids(frame: BinaryFrame, min_area: int = DEFAULT_MIN_AREA) -> MarkerSet:
    """Centroids of components with area >= ``min_area``, ordered by (y, x)."""
    if min_area < 1:
        raise ParameterError("min_area must be >= 1")
    labels, n = label_components(frame)
    if n == 0:
        return MarkerSet(np.zeros((0, 2)))
    index = np.arange(1, n + 1)
    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    ys, xs = np.indices(labels.shape)
    cx = ndimage.sum_labels(xs, labels, index) / areas
    cy = ndimage.sum_labels(ys, labels, index) / areas
    keep = areas >= min_area
    pts = np.column_stack([cx[keep], cy[keep]])
    order = np.lexsort((pts[:, 0], pts[:, 1]))
    return MarkerSet(pts[order])


def binarize(frame: GrayFrame, window: int = DEFAULT_WINDOW, offset: float = DEFAULT_OFFSET,
             max_area: int | None = DEFAULT_MAX_AREA) -> BinaryFrame:
    """Threshold then (optionally) drop glare blobs."""
    binary = adaptive_threshold(frame, window, offset)
    if max_area is not None:
        binary = remove_large_blobs(binary, max_area)
    return binary


def downsample(bits: np.ndarray, size: int) -> np.ndarray:
    """Area-average a 2-D array onto a ``size`` x ``size`` grid.

    Works for arbitrary input sizes by weighting each source pixel by its
    overlap with the destination cell.
    """
    bits = np.asarray(bits, dtype=np.float64)
    h, w = bits.shape
    if h % size == 0 and w % size == 0:
        return bits.reshape(size, h // size, size, w // size).mean(axis=(1, 3))
    ry = _resample_matrix(h, size)
    rx = _resample_matrix(w, size)
    return ry @ bits @ rx.T


def _resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    edges = np.linspace(0.0, n_in, n_out + 1)
    m = np.zeros((n_out, n_in))
    for i in range(n_out):
        lo, hi = edges[i], edges[i + 1]
        for j in range(int(np.floor(lo)), min(int(np.ceil(hi)), n_in)):
            m[i, j] = min(hi, j + 1) - max(lo, j)
        m[i] /= hi - lo
    return m


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def write_container(path: str | Path, frames: list[GrayFrame]) -> None:
    """Write frames into a TACF container."""
    if not frames:
        raise ParameterError("container needs at least one frame")
    h, w = frames[0].height, frames[0].width
    if w > 0xFFFF or h > 0xFFFF:
        raise ParameterError("frame dimensions must fit in u16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CONTAINER_MAGIC, CONTAINER_VERSION, w, h, len(frames)))
        for f in frames:
            if (f.height, f.width) != (h, w):
                raise ParameterError("all frames in a container must share dimensions")
            fh.write(f.to_bytes())


def read_container(path: str | Path) -> list[GrayFrame]:
    """Read a TACF container; raises FormatError on bad magic or truncation."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header", len(raw))
    magic, version, w, h, count = _HEADER.unpack_from(raw, 0)
    if magic != CONTAINER_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}", 0)
    if version != CONTAINER_VERSION:
        raise FormatError(f"{path}: unsupported version {version}", 4)
    if w == 0 or h == 0:
        raise FormatError(f"{path}: zero frame dimension", 5)
    size = w * h
    expected = _HEADER.size + size * count
    if len(raw) != expected:
        # report where the first incomplete frame starts
        complete = (len(raw) - _HEADER.size) // size
        raise FormatError(
            f"{path}: expected {expected} bytes for {count} frames, found {len(raw)}",
            _HEADER.size + complete * size,
        )
    frames = []
    for i in range(count):
        start = _HEADER.size + i * size
        frames.append(GrayFrame.from_bytes(raw[start:start + size], w, h, timestamp=i))
    return frames


def write_pgm(path: str | Path, frame: GrayFrame) -> None:
    with open(path, "wb") as fh:
        fh.write(f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii"))
        fh.write(frame.to_bytes())


def read_pgm(path: str | Path) -> GrayFrame:
    raw = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header", pos)
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5)", 0)
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PGM supported (maxval {maxval})", pos)
    pos += 1  # single whitespace after maxval
    data = raw[pos:pos + w * h]
    if len(data) != w * h:
        raise FormatError(f"{path}: truncated pixel data", pos + len(data))
    return GrayFrame.from_bytes(data, w, h)
