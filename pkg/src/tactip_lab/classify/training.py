"""Minibatch stochastic gradient descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..tracking import DataError
from .layers import softmax_cross_entropy
from .models import Network, evaluate
from .scaler import StandardScaler

EPOCHS = 200
LEARNING_RATE = 0.05
BATCH = 32


class TrainingError(RuntimeError):
    def __init__(self, message: str, epoch: int):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float
    val_accuracy: float | None = None


@dataclass
class TrainingResult:
    model: Network
    curve: list[EpochStats] = field(default_factory=list)

    @property
    def final_accuracy(self) -> float:
        return self.curve[-1].accuracy if self.curve else float("nan")


def train_sgd(model: Network, X, y, epochs: int = EPOCHS, learning_rate: float = LEARNING_RATE,
              batch: int = BATCH, seed: int = 0, X_val=None, y_val=None, scale: bool = True,
              target_accuracy: float | None = None) -> TrainingResult:
    """Train ``model`` in place on class-index targets ``y``.

    Shuffling uses its own seeded stream; dropout masks and initial weights
    come from the model's seed, so a (model seed, seed) pair fixes every
    number produced. When ``target_accuracy`` is given, training stops after
    the first epoch whose training accuracy reaches it.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    if len(X) == 0:
        raise DataError("empty training set")
    if len(X) != len(y):
        raise DataError(f"{len(X)} inputs but {len(y)} targets")
    flat = X.reshape(len(X), -1)
    if flat.shape[1] != model.input_size:
        raise DataError(f"inputs have {flat.shape[1]} features, model expects {model.input_size}")
    if y.min() < 0 or y.max() >= len(model.classes):
        raise DataError("target index outside the class set")
    if scale:
        model.scaler = StandardScaler.fit(flat)
    Z = model.prepare(flat)
    rng = np.random.default_rng([seed, 2])
    result = TrainingResult(model)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(Z))
        total = 0.0
        for start in range(0, len(Z), batch):
            idx = order[start:start + batch]
            logits = model.forward(Z[idx], train=True)
            loss, grad = softmax_cross_entropy(logits, y[idx])
            if not np.isfinite(loss):
                raise TrainingError("loss is not finite", epoch)
            total += loss * len(idx)
            model.backward(grad)
            for layer in model.layers:
                for name, g in layer.grads.items():
                    layer.params[name] -= learning_rate * g
        acc = evaluate(model, flat, y)
        val = evaluate(model, X_val, y_val) if X_val is not None and len(X_val) else None
        result.curve.append(EpochStats(epoch, total / len(Z), acc, val))
        if target_accuracy is not None and acc >= target_accuracy:
            break
    return result


def write_curve_csv(path, curves: list[list[EpochStats]]) -> None:
    """Per-epoch mean and std over one or more runs."""
    n = min(len(c) for c in curves)
    with open(path, "w") as fh:
        fh.write("epoch,loss_mean,loss_std,accuracy_mean,accuracy_std,val_accuracy_mean,val_accuracy_std\n")
        for e in range(n):
            loss = np.array([c[e].loss for c in curves])
            acc = np.array([c[e].accuracy for c in curves])
            vals = [c[e].val_accuracy for c in curves if c[e].val_accuracy is not None]
            vm, vs = (f"{np.mean(vals):.6f}", f"{np.std(vals):.6f}") if vals else ("", "")
            fh.write(f"{e + 1},{loss.mean():.6f},{loss.std():.6f},{acc.mean():.6f},{acc.std():.6f},{vm},{vs}\n")
