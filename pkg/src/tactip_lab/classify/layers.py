"""Layers with explicit forward/backward passes (float64, NumPy only)."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Layer:
    params: dict[str, np.ndarray] = {}
    grads: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"type": type(self).__name__}


def glorot_limit(fan_in: int, fan_out: int, after_sigmoid: bool) -> float:
    # Glorot & Bengio: four times the tanh range when the inputs are sigmoid units
    return (4.0 if after_sigmoid else 1.0) * np.sqrt(6.0 / (fan_in + fan_out))


class Dense(Layer):
    """Affine layer. With ``after_sigmoid`` it reads sigmoid outputs.

    Those inputs are centred on 0.5 before the product: (x - 0.5) W + b. The
    function class is unchanged (the shift folds into the bias) but SGD no
    longer has to fight the large common-mode component of sigmoid outputs.
    """

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, after_sigmoid: bool = False):
        limit = glorot_limit(n_in, n_out, after_sigmoid)
        self.params = {"W": rng.uniform(-limit, limit, (n_in, n_out)), "b": np.zeros(n_out)}
        self.grads = {}
        self.offset = 0.5 if after_sigmoid else 0.0
        self._x = None

    def forward(self, x, train=False):
        if self.offset:
            x = x - self.offset
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, grad):
        self.grads = {"W": self._x.T @ grad, "b": grad.sum(axis=0)}
        return grad @ self.params["W"].T

    def describe(self):
        n_in, n_out = self.params["W"].shape
        return {"type": "Dense", "n_in": n_in, "n_out": n_out, "offset": self.offset}


class Conv2D(Layer):
    """Valid convolution, input (N, C, H, W), filters (K, C, kh, kw), square stride."""

    def __init__(self, in_channels: int, filters: int, size: int, stride: int, rng: np.random.Generator):
        limit = glorot_limit(in_channels * size * size, filters * size * size, False)
        self.params = {"W": rng.uniform(-limit, limit, (filters, in_channels, size, size)),
                       "b": np.zeros(filters)}
        self.grads = {}
        self.size = size
        self.stride = stride
        self._cols = None
        self._shape = None

    def output_shape(self, h: int, w: int) -> tuple[int, int]:
        return (h - self.size) // self.stride + 1, (w - self.size) // self.stride + 1

    def forward(self, x, train=False):
        n, c, h, w = x.shape
        k = self.size
        ho, wo = self.output_shape(h, w)
        if ho < 1 or wo < 1:
            raise ValueError(f"input {h}x{w} smaller than the {k}x{k} filter")
        patches = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::self.stride, ::self.stride][:, :, :ho, :wo]
        cols = patches.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
        self._cols = cols
        self._shape = (n, c, h, w, ho, wo)
        kf = self.params["W"].shape[0]
        out = cols @ self.params["W"].reshape(kf, -1).T + self.params["b"]
        return out.reshape(n, ho, wo, kf).transpose(0, 3, 1, 2)

    def backward(self, grad):
        n, c, h, w, ho, wo = self._shape
        k, s = self.size, self.stride
        kf = self.params["W"].shape[0]
        g = grad.transpose(0, 2, 3, 1).reshape(n * ho * wo, kf)
        self.grads = {"W": (g.T @ self._cols).reshape(self.params["W"].shape), "b": g.sum(axis=0)}
        dcols = (g @ self.params["W"].reshape(kf, -1)).reshape(n, ho, wo, c, k, k)
        dx = np.zeros((n, c, h, w))
        for i in range(k):
            for j in range(k):
                dx[:, :, i:i + s * ho:s, j:j + s * wo:s] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return dx

    def describe(self):
        kf, c, k, _ = self.params["W"].shape
        return {"type": "Conv2D", "in_channels": c, "filters": kf, "size": k, "stride": self.stride}


class Sigmoid(Layer):
    def __init__(self):
        self.params, self.grads = {}, {}
        self._y = None

    def forward(self, x, train=False):
        # split by sign so exp never overflows
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        self._y = y
        return y

    def backward(self, grad):
        return grad * self._y * (1.0 - self._y)


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by 1/(1-rate) during training only."""

    def __init__(self, rate: float, rng: np.random.Generator):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate
        self.rng = rng
        self.params, self.grads = {}, {}
        self._mask = None

    def forward(self, x, train=False):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (self.rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask

    def describe(self):
        return {"type": "Dropout", "rate": self.rate}


class Flatten(Layer):
    def __init__(self):
        self.params, self.grads = {}, {}
        self._shape = None

    def forward(self, x, train=False):
        self._shape = x.shape
        return x.reshape(len(x), -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Reshape(Layer):
    """Flat feature rows -> (N, 1, H, W) images for the convolution."""

    def __init__(self, height: int, width: int):
        self.height, self.width = height, width
        self.params, self.grads = {}, {}

    def forward(self, x, train=False):
        return x.reshape(len(x), 1, self.height, self.width)

    def backward(self, grad):
        return grad.reshape(len(grad), -1)

    def describe(self):
        return {"type": "Reshape", "height": self.height, "width": self.width}


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of integer ``targets`` and its gradient w.r.t. ``logits``."""
    n = len(logits)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted - log_z[:, None]
    loss = -log_p[np.arange(n), targets].mean()
    grad = np.exp(log_p)
    grad[np.arange(n), targets] -= 1.0
    return float(loss), grad / n
