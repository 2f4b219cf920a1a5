"""Receptive-field force grid with temporal dampening.

Each update compares the new frame with the previous one. Every grid cell
receives the mean absolute pixel change inside it, minus the frame-wide
mean change (so global flicker cancels) and minus the dampener ``gamma``.
Activations accumulate across frames and are clamped at zero, which gives
the fading trail after a stimulus stops moving.
"""

from __future__ import annotations

import numpy as np

from .imagery import GrayFrame, ParameterError

DEFAULT_GRID = 5
# calibrated on simulator streams (pixel noise 4): idle frames stay at zero
# and a settled press fades out in roughly ten frames
DEFAULT_GAMMA = 5.0
DEFAULT_THRESHOLD = 10.0


def cell_edges(length: int, cells: int) -> np.ndarray:
    """Cell boundaries along one axis; the remainder goes to the last cell."""
    step = length // cells
    edges = np.arange(cells + 1) * step
    edges[-1] = length
    return edges


class ForceGrid:
    """Persistent g x g activation matrix driven by consecutive frames."""

    def __init__(self, grid_size: int = DEFAULT_GRID, gamma: float = DEFAULT_GAMMA,
                 first_frame: GrayFrame | None = None):
        if grid_size < 1:
            raise ParameterError("grid_size must be >= 1")
        if gamma < 0:
            raise ParameterError("gamma must be >= 0")
        self.grid_size = grid_size
        self.gamma = float(gamma)
        self.activation = np.zeros((grid_size, grid_size))
        self.prev_frame: GrayFrame | None = None
        self.row_edges: np.ndarray | None = None
        self.col_edges: np.ndarray | None = None
        if first_frame is not None:
            self._set_reference(first_frame)

    def _set_reference(self, frame: GrayFrame) -> None:
        g = self.grid_size
        if frame.height < g or frame.width < g:
            raise ParameterError(f"frame {frame.width}x{frame.height} smaller than grid {g}")
        self.prev_frame = frame
        self.row_edges = cell_edges(frame.height, g)
        self.col_edges = cell_edges(frame.width, g)

    def cell_bounds(self) -> list[tuple[int, int, int, int]]:
        """(y0, y1, x0, x1) pixel ranges per cell, row-major."""
        if self.row_edges is None:
            raise ParameterError("grid has no reference frame yet")
        r, c = self.row_edges, self.col_edges
        return [(r[i], r[i + 1], c[j], c[j + 1])
                for i in range(self.grid_size) for j in range(self.grid_size)]

    def raw_change(self, frame: GrayFrame) -> tuple[np.ndarray, float]:
        """Per-cell mean absolute difference and the frame-wide mean."""
        diff = np.abs(frame.data.astype(np.float64) - self.prev_frame.data.astype(np.float64))
        # reduceat sums over the (possibly uneven) cell blocks
        sums = np.add.reduceat(np.add.reduceat(diff, self.row_edges[:-1], axis=0),
                               self.col_edges[:-1], axis=1)
        counts = np.outer(np.diff(self.row_edges), np.diff(self.col_edges))
        return sums / counts, diff.sum() / diff.size

    def update(self, frame: GrayFrame) -> "ForceGrid":
        """Fold one frame into the grid (in place) and return the grid.

        The first frame only becomes the comparison frame.
        """
        if self.prev_frame is None:
            self._set_reference(frame)
            return self
        if frame.data.shape != self.prev_frame.data.shape:
            raise ParameterError(
                f"frame shape {frame.data.shape} does not match previous {self.prev_frame.data.shape}"
            )
        raw, global_mean = self.raw_change(frame)
        self.activation = np.maximum(0.0, self.activation + raw - global_mean - self.gamma)
        self.prev_frame = frame
        return self

    def total(self) -> float:
        return float(self.activation.sum())


def contact_detected(grid: ForceGrid, threshold: float = DEFAULT_THRESHOLD) -> tuple[bool, float]:
    if threshold < 0:
        raise ParameterError("threshold must be >= 0")
    total = grid.total()
    return total > threshold, total


def contact_series(frames, grid_size: int = DEFAULT_GRID, gamma: float = DEFAULT_GAMMA,
                   threshold: float = DEFAULT_THRESHOLD) -> list[tuple[int, float, bool]]:
    """Run a fresh grid over a frame stream; (index, total, flag) per frame."""
    grid = ForceGrid(grid_size, gamma)
    rows = []
    for i, frame in enumerate(frames):
        grid.update(frame)
        flag, total = contact_detected(grid, threshold)
        rows.append((i, total, flag))
    return rows
