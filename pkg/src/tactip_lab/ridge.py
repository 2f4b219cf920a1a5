"""Closed-form ridge regression shared by the marker and pressure models."""

from __future__ import annotations

import numpy as np


def ridge_fit(X: np.ndarray, Y: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Solve min ||Xc W - Yc||^2 + alpha ||W||^2 on centred data, unpenalised intercept.

    Uses the primal normal equations (X^T X + alpha I) W = X^T Y when there
    are at least as many samples as features, otherwise the equivalent dual
    form W = X^T (X X^T + alpha I)^-1 Y.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    squeeze = Y.ndim == 1
    if squeeze:
        Y = Y[:, None]
    x_mean = X.mean(axis=0)
    y_mean = Y.mean(axis=0)
    Xc = X - x_mean
    Yc = Y - y_mean
    n, d = Xc.shape
    if n >= d:
        A = Xc.T @ Xc
        A[np.diag_indices_from(A)] += alpha
        W = np.linalg.solve(A, Xc.T @ Yc)
    else:
        K = Xc @ Xc.T
        K[np.diag_indices_from(K)] += alpha
        W = Xc.T @ np.linalg.solve(K, Yc)
    b = y_mean - x_mean @ W
    if squeeze:
        return W[:, 0], b[0]
    return W, b


def ridge_objective(X, Y, W, b, alpha: float) -> float:
    r = np.asarray(X) @ W + b - np.asarray(Y)
    return float((r ** 2).sum() + alpha * (np.asarray(W) ** 2).sum())
