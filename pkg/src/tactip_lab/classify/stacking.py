"""T-frame temporal stacks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CLASS_SETS = {
    "surface_state": ("soft", "hard", "slippery", "no_touch"),
}


@dataclass
class TemporalStack:
    """T consecutive inputs, oldest first, and the label of the newest one."""

    data: np.ndarray  # (h*T, w) for images or (2*markers*T,) for vectors
    T: int
    label: str


def stack_frames(history, T: int, gate=None, label: str = "") -> TemporalStack | None:
    """Stack the last T frames of ``history`` vertically (newest at the bottom).

    Returns None when the history is too short or the newest frame is not
    gated as contact.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if len(history) < T:
        return None
    if gate is not None and not bool(np.asarray(gate)[-1]):
        return None
    frames = [np.asarray(getattr(f, "bits", getattr(f, "data", f))) for f in history[-T:]]
    if frames[0].ndim == 1:
        data = np.concatenate(frames)
    else:
        data = np.vstack(frames)
    return TemporalStack(data, T, label)


def stack_sequence(inputs: np.ndarray, ends, T: int) -> np.ndarray:
    """Batch version: for each end index e, concatenate inputs[e-T+1 .. e] along axis 1.

    ``inputs`` is (n, h, w) for images (result (len(ends), h*T, w)) or (n, d)
    for vectors (result (len(ends), d*T)).
    """
    inputs = np.asarray(inputs)
    ends = np.asarray(ends, dtype=int)
    if len(ends) and (ends.min() < T - 1 or ends.max() >= len(inputs)):
        raise ValueError("stack end index lacks T-1 predecessors")
    idx = ends[:, None] + np.arange(-T + 1, 1)[None, :]
    picked = inputs[idx]  # (m, T, ...)
    if inputs.ndim == 3:
        m, _, h, w = picked.shape
        return picked.reshape(m, T * h, w)
    return picked.reshape(len(ends), -1)
