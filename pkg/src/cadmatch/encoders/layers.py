"""Neural network layers with explicit forward and backward passes.

Every layer follows the same tiny protocol: ``forward(x)`` caches what the
backward pass needs, ``backward(grad)`` fills ``self.grads`` and returns the
gradient with respect to the input. Parameters live in ``self.params`` as a
name -> array dict so optimizers and checkpoints can address them uniformly.

All layers are dtype-polymorphic: build them with dtype=np.float64 to run
finite-difference gradient checks, float32 for training.
"""

import numpy as np

from ..errors import ShapeError

__all__ = [
    "Dense",
    "Conv2d",
    "DepthwiseConv2d",
    "ReLU",
    "ReLU6",
    "InstanceNorm",
    "FeatureNorm",
    "GlobalAvgPool",
    "MaxPoints",
    "Sequential",
    "Residual",
    "softmax",
    "cross_entropy",
]


class Layer:
    def __init__(self):
        self.params = {}
        self.grads = {}

    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError


class Dense(Layer):
    """Affine map on the last axis; leading axes are treated as batch."""

    def __init__(self, n_in, n_out, rng, dtype=np.float32, init="he"):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        if init == "he":
            w = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out))
        elif init == "glorot":
            limit = np.sqrt(6.0 / (n_in + n_out))
            w = rng.uniform(-limit, limit, size=(n_in, n_out))
        else:
            raise ValueError(f"unknown init {init!r}")
        self.params = {"w": w.astype(dtype), "b": np.zeros(n_out, dtype=dtype)}

    def forward(self, x):
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"expected last axis {self.n_in}, got {x.shape}")
        self._x = x
        return x @ self.params["w"] + self.params["b"]

    def backward(self, grad):
        x2 = self._x.reshape(-1, self.n_in)
        g2 = grad.reshape(-1, self.n_out)
        self.grads = {"w": x2.T @ g2, "b": g2.sum(axis=0)}
        return grad @ self.params["w"].T


def _window_patches(x, kh, kw, stride):
    """(B, OH, OW, C, kh, kw) view of padded NHWC input."""
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    return win[:, ::stride, ::stride]


def _scatter_patches(grad_patches, x_shape, kh, kw, stride, pad):
    """Adjoint of _window_patches: accumulate patch grads back onto the input."""
    b, h, w, c = x_shape
    gx = np.zeros((b, h + 2 * pad, w + 2 * pad, c), dtype=grad_patches.dtype)
    oh, ow = grad_patches.shape[1], grad_patches.shape[2]
    for i in range(kh):
        for j in range(kw):
            gx[:, i : i + stride * oh : stride, j : j + stride * ow : stride] += (
                grad_patches[:, :, :, :, i, j]
            )
    if pad:
        gx = gx[:, pad:-pad, pad:-pad, :]
    return gx


class Conv2d(Layer):
    """NHWC convolution via im2col; weight layout (kh, kw, c_in, c_out)."""

    def __init__(self, kh, kw, c_in, c_out, rng, stride=1, pad=0,
                 dtype=np.float32):
        super().__init__()
        self.kh, self.kw, self.c_in, self.c_out = kh, kw, c_in, c_out
        self.stride, self.pad = stride, pad
        fan_in = kh * kw * c_in
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(kh, kw, c_in, c_out))
        self.params = {"w": w.astype(dtype), "b": np.zeros(c_out, dtype=dtype)}

    def forward(self, x):
        if x.ndim != 4 or x.shape[3] != self.c_in:
            raise ShapeError(f"expected (B,H,W,{self.c_in}), got {x.shape}")
        self._x_shape = x.shape
        if self.pad:
            x = np.pad(x, ((0, 0), (self.pad,) * 2, (self.pad,) * 2, (0, 0)))
        patches = _window_patches(x, self.kh, self.kw, self.stride)
        b, oh, ow = patches.shape[:3]
        # (B*OH*OW, C*kh*kw) rows against (C*kh*kw, c_out) columns
        self._cols = patches.reshape(b * oh * ow, -1)
        w2 = self.params["w"].transpose(2, 0, 1, 3).reshape(-1, self.c_out)
        out = self._cols @ w2 + self.params["b"]
        return out.reshape(b, oh, ow, self.c_out)

    def backward(self, grad):
        b, oh, ow, _ = grad.shape
        g2 = grad.reshape(b * oh * ow, self.c_out)
        gw2 = self._cols.T @ g2
        self.grads = {
            "w": gw2.reshape(self.c_in, self.kh, self.kw, self.c_out).transpose(1, 2, 0, 3),
            "b": g2.sum(axis=0),
        }
        w2 = self.params["w"].transpose(2, 0, 1, 3).reshape(-1, self.c_out)
        gcols = g2 @ w2.T
        gp = gcols.reshape(b, oh, ow, self.c_in, self.kh, self.kw)
        return _scatter_patches(gp, self._x_shape, self.kh, self.kw, self.stride, self.pad)


class DepthwiseConv2d(Layer):
    """Per-channel NHWC convolution; weight layout (c, kh, kw)."""

    def __init__(self, kh, kw, channels, rng, stride=1, pad=0, dtype=np.float32):
        super().__init__()
        self.kh, self.kw, self.channels = kh, kw, channels
        self.stride, self.pad = stride, pad
        fan_in = kh * kw
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(channels, kh, kw))
        self.params = {"w": w.astype(dtype), "b": np.zeros(channels, dtype=dtype)}

    def forward(self, x):
        if x.ndim != 4 or x.shape[3] != self.channels:
            raise ShapeError(f"expected (B,H,W,{self.channels}), got {x.shape}")
        self._x_shape = x.shape
        if self.pad:
            x = np.pad(x, ((0, 0), (self.pad,) * 2, (self.pad,) * 2, (0, 0)))
        self._patches = _window_patches(x, self.kh, self.kw, self.stride)
        return (
            np.einsum("bhwcij,cij->bhwc", self._patches, self.params["w"])
            + self.params["b"]
        )

    def backward(self, grad):
        self.grads = {
            "w": np.einsum("bhwcij,bhwc->cij", self._patches, grad),
            "b": grad.sum(axis=(0, 1, 2)),
        }
        gp = np.einsum("bhwc,cij->bhwcij", grad, self.params["w"])
        return _scatter_patches(gp, self._x_shape, self.kh, self.kw, self.stride, self.pad)


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0)

    def backward(self, grad):
        return np.where(self._mask, grad, 0)


class ReLU6(Layer):
    def forward(self, x):
        self._mask = (x > 0) & (x < 6)
        return np.clip(x, 0, 6)

    def backward(self, grad):
        return np.where(self._mask, grad, 0)


class InstanceNorm(Layer):
    """Standardize each channel of each sample over its spatial positions.

    No learned scale or shift, so the layer carries no parameters and no
    running statistics; behaviour is identical in training and inference.
    Stabilizes deep conv stacks enough to train them at plain-SGD rates.
    """

    def __init__(self, eps=1e-5):
        super().__init__()
        self.eps = eps

    def forward(self, x):
        if x.ndim != 4:
            raise ShapeError(f"expected (B,H,W,C), got {x.shape}")
        mu = x.mean(axis=(1, 2), keepdims=True)
        var = x.var(axis=(1, 2), keepdims=True)
        self._inv = 1.0 / np.sqrt(var + self.eps)
        self._xhat = (x - mu) * self._inv
        return self._xhat

    def backward(self, grad):
        xhat = self._xhat
        g_mean = grad.mean(axis=(1, 2), keepdims=True)
        gx_mean = (grad * xhat).mean(axis=(1, 2), keepdims=True)
        return self._inv * (grad - g_mean - xhat * gx_mean)


class FeatureNorm(Layer):
    """Scale each row of (B, D) to Euclidean length sqrt(D).

    Closing a feature branch with this puts every embedding on a common
    sphere, so Euclidean retrieval compares directions and the two halves of
    a concatenated feature contribute on the same scale. The sqrt(D) radius
    keeps per-dimension magnitudes near one, which lets the softmax head
    train at ordinary rates. Parameter-free.
    """

    def __init__(self, eps=1e-12):
        super().__init__()
        self.eps = eps

    def forward(self, x):
        if x.ndim != 2:
            raise ShapeError(f"expected (B, D), got {x.shape}")
        radius = np.sqrt(x.shape[1])
        self._inv = radius / np.maximum(
            np.linalg.norm(x, axis=1, keepdims=True), self.eps
        )
        self._y = x * self._inv
        return self._y

    def backward(self, grad):
        # the row direction y/radius is unit; remove grad's radial component
        unit = self._y / np.sqrt(self._y.shape[1])
        return self._inv * (grad - unit * (grad * unit).sum(axis=1, keepdims=True))


class GlobalAvgPool(Layer):
    """(B, H, W, C) -> (B, C)."""

    def forward(self, x):
        self._shape = x.shape
        return x.mean(axis=(1, 2))

    def backward(self, grad):
        b, h, w, c = self._shape
        return np.broadcast_to(grad[:, None, None, :], self._shape) / (h * w)


class MaxPoints(Layer):
    """(B, N, D) -> (B, D) max over points.

    The backward pass routes each feature's gradient to the first point
    attaining the maximum, so tie handling is deterministic.
    """

    def forward(self, x):
        self._idx = x.argmax(axis=1)
        self._shape = x.shape
        return np.take_along_axis(x, self._idx[:, None, :], axis=1)[:, 0, :]

    def backward(self, grad):
        gx = np.zeros(self._shape, dtype=grad.dtype)
        np.put_along_axis(gx, self._idx[:, None, :], grad[:, None, :], axis=1)
        return gx


class Sequential(Layer):
    """Named chain of layers; parameter names are '<layer>.<param>'."""

    def __init__(self, named_layers):
        super().__init__()
        self.layers = list(named_layers)

    def forward(self, x):
        for _, layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad):
        for _, layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    @property
    def params(self):
        out = {}
        for name, layer in self.layers:
            for pname, val in layer.params.items():
                out[f"{name}.{pname}"] = val
        return out

    @params.setter
    def params(self, value):
        if value:  # Layer.__init__ assigns {}, nothing to distribute
            raise AttributeError("set parameters on the owning layers")

    @property
    def grads(self):
        out = {}
        for name, layer in self.layers:
            for pname, val in layer.grads.items():
                out[f"{name}.{pname}"] = val
        return out

    @grads.setter
    def grads(self, value):
        if value:
            raise AttributeError("gradients are computed by backward()")


class Residual(Layer):
    """y = inner(x) + x; requires matching input/output shape."""

    def __init__(self, inner):
        super().__init__()
        self.inner = inner

    def forward(self, x):
        return self.inner.forward(x) + x

    def backward(self, grad):
        return self.inner.backward(grad) + grad

    @property
    def params(self):
        return self.inner.params

    @params.setter
    def params(self, value):
        if value:
            raise AttributeError("set parameters on the owning layers")

    @property
    def grads(self):
        return self.inner.grads

    @grads.setter
    def grads(self, value):
        if value:
            raise AttributeError("gradients are computed by backward()")


def softmax(logits, axis=-1):
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def cross_entropy(logits, labels, class_weights=None):
    """Mean cross-entropy loss and its gradient with respect to the logits.

    labels: (B,) int class indices. class_weights: per-class multipliers,
    normalized so the weighted mean stays on the loss scale of the unweighted
    case.
    """
    b = logits.shape[0]
    probs = softmax(logits)
    eps = np.finfo(logits.dtype).tiny
    picked = probs[np.arange(b), labels]
    if class_weights is None:
        weights = np.ones(b, dtype=logits.dtype)
    else:
        weights = np.asarray(class_weights, dtype=logits.dtype)[labels]
    weights = weights / weights.sum()
    loss = -(weights * np.log(picked + eps)).sum()
    grad = probs * weights[:, None]
    grad[np.arange(b), labels] -= weights
    return loss, grad
