"""Central finite-difference gradient checking.

Checks run in float64; single precision is too noisy for the default
step size. The relative-error measure follows the usual
|a - b| / max(floor, |a| + |b|) convention so near-zero gradients do not
blow up the ratio.
"""

import numpy as np


def numeric_grad(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function f at x, elementwise."""
    x = x.astype(np.float64, copy=True)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return g


def rel_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    denom = np.maximum(floor, np.abs(a) + np.abs(b))
    return float(np.max(np.abs(a - b) / denom))


def check_network_gradients(net, batch, labels, eps: float = 1e-5):
    """Max relative error between backward() and finite differences.

    Perturbs every weight and bias of every parameterized layer; the net
    must be float64. Returns {layer_name: (weight_err, bias_err)}.
    """
    net.forward(batch)
    analytic = net.backward(labels)

    def loss_with(layer, attr, value):
        saved = getattr(layer, attr)
        setattr(layer, attr, value)
        net.forward(batch)
        out = net.loss(labels)
        setattr(layer, attr, saved)
        return out

    errs = {}
    for layer in net.param_layers():
        gw, gb = analytic[layer.name]
        num_w = numeric_grad(lambda w, l=layer: loss_with(l, "weights", w), layer.weights, eps)
        num_b = numeric_grad(lambda b, l=layer: loss_with(l, "biases", b), layer.biases, eps)
        errs[layer.name] = (rel_error(gw, num_w), rel_error(gb, num_b))
    return errs
