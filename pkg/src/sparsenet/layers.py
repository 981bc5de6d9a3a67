"""Network layers with explicit forward and backward passes.

No autodiff: each layer caches what its backward pass needs during
forward and computes parameter/input gradients directly. The layer set
is fixed (conv, max-pool, relu, fully-connected, softmax loss), which
keeps every backward pass independently checkable against finite
differences.
"""

import numpy as np

from .errors import ShapeError


class Layer:
    """Base layer; parameterized subclasses carry weights/biases by name."""

    has_params = False
    name = ""

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def clear_cache(self) -> None:
        pass


def _im2col(xp, kh, kw, oh, ow, stride):
    n, c = xp.shape[:2]
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
    return cols.reshape(n, c * kh * kw, oh * ow)


def _col2im(dcols, shape_padded, kh, kw, oh, ow, stride):
    n, c, hp, wp = shape_padded
    dxp = np.zeros(shape_padded, dtype=dcols.dtype)
    dcols = dcols.reshape(n, c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += dcols[
                :, :, i, j
            ]
    return dxp


class Conv2d(Layer):
    """2-d convolution; weights are (out_channels, in_channels, kh, kw)."""

    has_params = True

    def __init__(self, name, in_channels, out_channels, kernel, stride=1, pad=0,
                 init_std=0.01, dtype=np.float32, rng=None):
        self.name = name
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        rng = rng or np.random.default_rng(0)
        self.weights = (init_std * rng.standard_normal(
            (out_channels, in_channels, kernel, kernel))).astype(dtype)
        self.biases = np.zeros(out_channels, dtype=dtype)
        self.grad_weights = None
        self.grad_biases = None
        self._cols = None
        self._x_shape = None

    def out_hw(self, h, w):
        k, s, p = self.kernel, self.stride, self.pad
        return (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1

    def forward(self, x):
        n, c, h, w = x.shape
        if c != self.in_channels:
            raise ShapeError(f"{self.name}: expected {self.in_channels} input channels, got {c}")
        k, s, p = self.kernel, self.stride, self.pad
        oh, ow = self.out_hw(h, w)
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        cols = _im2col(xp, k, k, oh, ow, s)
        w2d = self.weights.reshape(self.out_channels, -1)
        out = np.matmul(w2d[None], cols) + self.biases[None, :, None]
        self._cols = cols
        self._x_shape = (n, c, h, w)
        return out.reshape(n, self.out_channels, oh, ow)

    def backward(self, dout):
        n, c, h, w = self._x_shape
        k, s, p = self.kernel, self.stride, self.pad
        oh, ow = self.out_hw(h, w)
        d2 = dout.reshape(n, self.out_channels, oh * ow)
        w2d = self.weights.reshape(self.out_channels, -1)
        self.grad_weights = np.matmul(d2, self._cols.transpose(0, 2, 1)).sum(axis=0).reshape(
            self.weights.shape
        )
        self.grad_biases = d2.sum(axis=(0, 2))
        dcols = np.matmul(w2d.T[None], d2)
        dxp = _col2im(dcols, (n, c, h + 2 * p, w + 2 * p), k, k, oh, ow, s)
        return dxp[:, :, p : p + h, p : p + w] if p else dxp

    def clear_cache(self):
        self._cols = None


class MaxPool2d(Layer):
    """Max pooling with stride equal to the window; spatial dims must divide."""

    def __init__(self, window):
        self.window = window
        self._argmax = None
        self._x_shape = None

    def forward(self, x):
        n, c, h, w = x.shape
        s = self.window
        if h % s or w % s:
            raise ShapeError(f"pool window {s} does not divide input {h}x{w}")
        oh, ow = h // s, w // s
        windows = (
            x.reshape(n, c, oh, s, ow, s).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, s * s)
        )
        # argmax takes the first maximum, so tie handling is deterministic
        self._argmax = windows.argmax(axis=-1)
        self._x_shape = x.shape
        return np.take_along_axis(windows, self._argmax[..., None], axis=-1)[..., 0]

    def backward(self, dout):
        n, c, h, w = self._x_shape
        s = self.window
        oh, ow = h // s, w // s
        dwin = np.zeros((n, c, oh, ow, s * s), dtype=dout.dtype)
        np.put_along_axis(dwin, self._argmax[..., None], dout[..., None], axis=-1)
        return (
            dwin.reshape(n, c, oh, ow, s, s).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
        )

    def clear_cache(self):
        self._argmax = None


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, x.dtype.type(0))

    def backward(self, dout):
        return np.where(self._mask, dout, dout.dtype.type(0))

    def clear_cache(self):
        self._mask = None


class Linear(Layer):
    """Fully-connected layer; flattens any trailing input dimensions."""

    has_params = True

    def __init__(self, name, in_features, out_features, init_std=0.01,
                 dtype=np.float32, rng=None):
        self.name = name
        self.in_features = in_features
        self.out_features = out_features
        rng = rng or np.random.default_rng(0)
        self.weights = (init_std * rng.standard_normal((out_features, in_features))).astype(dtype)
        self.biases = np.zeros(out_features, dtype=dtype)
        self.grad_weights = None
        self.grad_biases = None
        self._x2d = None
        self._x_shape = None

    def forward(self, x):
        x2d = x.reshape(len(x), -1)
        if x2d.shape[1] != self.in_features:
            raise ShapeError(
                f"{self.name}: expected {self.in_features} input features, got {x2d.shape[1]}"
            )
        self._x2d = x2d
        self._x_shape = x.shape
        return x2d @ self.weights.T + self.biases

    def backward(self, dout):
        self.grad_weights = dout.T @ self._x2d
        self.grad_biases = dout.sum(axis=0)
        return (dout @ self.weights).reshape(self._x_shape)

    def clear_cache(self):
        self._x2d = None


class SoftmaxCrossEntropy(Layer):
    """Softmax over class scores with mean cross-entropy loss.

    forward() returns the probability rows; loss()/backward() consume the
    cached probabilities for a given label vector.
    """

    def __init__(self):
        self._probs = None

    def forward(self, scores):
        shifted = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        self._probs = e / e.sum(axis=1, keepdims=True)
        return self._probs

    def loss(self, labels) -> float:
        n = len(labels)
        p = self._probs[np.arange(n), labels]
        return float(-np.mean(np.log(np.maximum(p, np.finfo(np.float64).tiny))))

    def backward(self, labels):
        n = len(labels)
        d = self._probs.copy()
        d[np.arange(n), labels] -= 1
        return d / self._probs.dtype.type(n)

    def clear_cache(self):
        self._probs = None
