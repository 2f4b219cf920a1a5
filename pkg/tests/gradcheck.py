"""Central finite-difference gradient checks shared by unit and acceptance tests."""

import numpy as np

from tactip_lab.classify.layers import softmax_cross_entropy

EPS = 1e-6


def rel_error(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-8)))


def numeric_grad(f, x, eps=EPS):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        hi = f()
        x[i] = old - eps
        lo = f()
        x[i] = old
        g[i] = (hi - lo) / (2 * eps)
    return g


def check_layer(layer, x, rng, train=False):
    """Worst relative error over the input gradient and every parameter gradient.

    The loss is a fixed random projection of the layer output, so the check
    exercises every output element.
    """
    out = layer.forward(x, train)
    proj = rng.normal(size=out.shape)
    layer.backward(proj)
    analytic = {"x": layer.backward(proj)} | dict(layer.grads)

    def loss():
        return float((layer.forward(x, train) * proj).sum())

    errors = {"x": rel_error(analytic["x"], numeric_grad(loss, x))}
    for name, p in layer.params.items():
        errors[name] = rel_error(analytic[name], numeric_grad(loss, p))
    return errors


def check_network(net, x, y):
    """Worst relative error of every parameter gradient of the mean cross-entropy."""

    def loss():
        return softmax_cross_entropy(net.forward(x, train=False), y)[0]

    _, grad = softmax_cross_entropy(net.forward(x, train=False), y)
    net.backward(grad)
    analytic = [(layer, name, layer.grads[name].copy()) for layer in net.layers for name in layer.params]
    return max(rel_error(g, numeric_grad(loss, layer.params[name])) for layer, name, g in analytic)
