"""Feed-forward (vector) and convolutional (image) surface classifiers."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..imagery import FormatError, ParameterError
from .layers import Conv2D, Dense, Dropout, Flatten, Reshape, Sigmoid, softmax
from .scaler import StandardScaler

MODEL_MAGIC = b"TACN"
DROPOUT = 0.2
FNN_HIDDEN = (256, 64)
CNN_FILTERS = 8
CNN_FILTER_SIZE = 8
CNN_STRIDE = 4
CNN_HIDDEN = 1000


class Network:
    """A layer sequence ending in logits; softmax is applied at prediction time."""

    def __init__(self, layers, classes, input_shape, arch: dict, seed: int = 0):
        self.layers = list(layers)
        self.classes = tuple(classes)
        self.input_shape = tuple(input_shape)
        self.arch = dict(arch)
        self.seed = seed
        self.scaler: StandardScaler | None = None

    @property
    def input_size(self) -> int:
        return int(np.prod(self.input_shape))

    def parameters(self):
        """(layer index, name, array) for every trainable array, in a fixed order."""
        for i, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                yield i, name, layer.params[name]

    def prepare(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape and x.reshape(len(x), -1).shape[1] != self.input_size:
            raise ParameterError(f"input shape {x.shape[1:]} does not match model input {self.input_shape}")
        x = x.reshape(len(x), -1)
        if self.scaler is not None:
            x = self.scaler.transform(x)
        return x

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def scores(self, x, batch: int = 256) -> np.ndarray:
        x = self.prepare(x)
        out = [softmax(self.forward(x[i:i + batch])) for i in range(0, len(x), batch)]
        return np.concatenate(out) if out else np.zeros((0, len(self.classes)))


def build_fnn(T: int, classes, markers: int = 133, hidden=FNN_HIDDEN, dropout: float = DROPOUT,
              seed: int = 0) -> Network:
    """Vector classifier: 2*markers*T inputs, two sigmoid hidden layers."""
    rng = np.random.default_rng([seed, 0])
    drop_rng = np.random.default_rng([seed, 1])
    n_in = 2 * markers * T
    h1, h2 = hidden
    layers = [Dense(n_in, h1, rng), Sigmoid(), Dropout(dropout, drop_rng),
              Dense(h1, h2, rng, after_sigmoid=True), Sigmoid(), Dropout(dropout, drop_rng),
              Dense(h2, len(classes), rng, after_sigmoid=True)]
    arch = {"arch": "fnn", "T": T, "markers": markers, "hidden": list(hidden), "dropout": dropout}
    return Network(layers, classes, (n_in,), arch, seed)


def build_cnn(frame_shape, T: int, classes, filters: int = CNN_FILTERS, size: int = CNN_FILTER_SIZE,
              stride: int = CNN_STRIDE, hidden: int = CNN_HIDDEN, dropout: float = DROPOUT,
              seed: int = 0) -> Network:
    """Image classifier on T frames stacked vertically: one 8x8 conv, one 1000-unit layer."""
    rng = np.random.default_rng([seed, 0])
    drop_rng = np.random.default_rng([seed, 1])
    h, w = frame_shape
    height = h * T
    conv = Conv2D(1, filters, size, stride, rng)
    ho, wo = conv.output_shape(height, w)
    if ho < 1 or wo < 1:
        raise ParameterError(f"stacked input {height}x{w} is smaller than the {size}x{size} filter")
    layers = [Reshape(height, w), conv, Sigmoid(), Flatten(), Dropout(dropout, drop_rng),
              Dense(filters * ho * wo, hidden, rng, after_sigmoid=True), Sigmoid(), Dropout(dropout, drop_rng),
              Dense(hidden, len(classes), rng, after_sigmoid=True)]
    arch = {"arch": "cnn", "T": T, "frame_shape": [h, w], "filters": filters, "size": size,
            "stride": stride, "hidden": hidden, "dropout": dropout}
    return Network(layers, classes, (height, w), arch, seed)


def build_from_arch(arch: dict, classes, seed: int = 0) -> Network:
    if arch["arch"] == "fnn":
        return build_fnn(arch["T"], classes, arch["markers"], tuple(arch["hidden"]), arch["dropout"], seed)
    if arch["arch"] == "cnn":
        return build_cnn(tuple(arch["frame_shape"]), arch["T"], classes, arch["filters"], arch["size"],
                         arch["stride"], arch["hidden"], arch["dropout"], seed)
    raise FormatError(f"unknown architecture {arch['arch']!r}")


def predict(model: Network, stack) -> tuple[str, np.ndarray]:
    """Label and class probabilities for one stack."""
    data = getattr(stack, "data", stack)
    scores = model.scores(np.asarray(data)[None])[0]
    return model.classes[int(np.argmax(scores))], scores


def evaluate(model: Network, X, y) -> float:
    """Fraction of correct predictions; ``y`` holds class indices."""
    y = np.asarray(y)
    if len(y) == 0:
        raise ParameterError("cannot evaluate on an empty dataset")
    return float((model.scores(X).argmax(axis=1) == y).mean())


def confusion_matrix(model: Network, X, y) -> np.ndarray:
    k = len(model.classes)
    pred = model.scores(X).argmax(axis=1)
    m = np.zeros((k, k), dtype=int)
    np.add.at(m, (np.asarray(y), pred), 1)
    return m


# ---------------------------------------------------------------------------
# TACN files: magic, u32 descriptor length, JSON descriptor, f64 arrays
# ---------------------------------------------------------------------------

def save_model(path: str | Path, model: Network) -> None:
    arrays = [a for _, _, a in model.parameters()]
    if model.scaler is not None:
        arrays += [model.scaler.mean, model.scaler.std]
    desc = {
        "arch": model.arch,
        "classes": list(model.classes),
        "seed": model.seed,
        "scaler": model.scaler is not None,
        "shapes": [list(a.shape) for a in arrays],
    }
    blob = json.dumps(desc, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_model(path: str | Path) -> Network:
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}", 0)
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated header", len(raw))
    (n,) = struct.unpack_from("<I", raw, 4)
    try:
        desc = json.loads(raw[8:8 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable architecture block ({exc})", 8) from None
    model = build_from_arch(desc["arch"], desc["classes"], desc.get("seed", 0))
    offset = 8 + n
    arrays = []
    for shape in desc["shapes"]:
        size = int(np.prod(shape))
        if offset + 8 * size > len(raw):
            raise FormatError(f"{path}: truncated weights", offset)
        arrays.append(np.frombuffer(raw, dtype="<f8", count=size, offset=offset).reshape(shape).copy())
        offset += 8 * size
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes", offset)
    params = list(model.parameters())
    if desc["scaler"]:
        model.scaler = StandardScaler(arrays[-2], arrays[-1])
        arrays = arrays[:-2]
    if len(arrays) != len(params):
        raise FormatError(f"{path}: expected {len(params)} weight arrays, found {len(arrays)}", 8 + n)
    for (i, name, cur), arr in zip(params, arrays):
        if cur.shape != arr.shape:
            raise FormatError(f"{path}: array for layer {i} {name} has shape {arr.shape}, expected {cur.shape}")
        model.layers[i].params[name] = arr
    return model
