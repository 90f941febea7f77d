"""Layer stack with recorded forward passes and reverse-mode gradients.

Five layer kinds: dense, conv2d (5x5 kernels, stride 1, "same" padding),
maxpool2d (2x2 windows, ceil-divided output), relu, and sigmoid.

A Network owns one flat parameter vector and one flat gradient vector;
each layer's weight and bias arrays are contiguous views into them, so an
optimizer can update every parameter with a handful of vector operations.

Evaluation (`record=False`, the default) never mutates the network, so a
built network can be shared freely across threads for inference.  A
recorded forward plus the matching backward mutate per-layer caches and
the gradient buffer and must stay single-writer.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError, StateError
from .init import glorot_uniform
from .loss import sigmoid


class Dense:
    """Affine map y = x @ W.T + b with weight shape (out_dim, in_dim).

    Inputs with more than two dimensions are flattened past the batch
    axis, which is how convolutional feature maps reach the dense head.
    """

    kind = "dense"
    param_names = ("W", "b")

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        if rng is None:
            self.W = np.zeros((self.out_dim, self.in_dim))
        else:
            self.W = glorot_uniform((self.out_dim, self.in_dim), rng)
        self.b = np.zeros(self.out_dim)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def out_shape(self, in_shape):
        flat = int(np.prod(in_shape))
        if flat != self.in_dim:
            raise DimensionError(
                f"dense expects input of size {self.in_dim}, got {in_shape}"
            )
        return (self.out_dim,)

    def forward(self, x, record=False):
        x2d = x.reshape(x.shape[0], -1) if x.ndim != 2 else x
        if x2d.shape[1] != self.in_dim:
            raise DimensionError(
                f"dense expects input dim {self.in_dim}, got {x2d.shape[1]}"
            )
        out = x2d @ self.W.T
        out += self.b
        if record:
            self._cache = (x2d, x.shape)
        return out

    def backward(self, g, need_input_grad=True):
        if self._cache is None:
            raise StateError("dense backward called before a recorded forward")
        x2d, orig_shape = self._cache
        self._cache = None
        np.matmul(g.T, x2d, out=self.dW)
        np.sum(g, axis=0, out=self.db)
        if not need_input_grad:
            return None
        dx = g @ self.W
        return dx.reshape(orig_shape)


class Conv2D:
    """2-D convolution: stride (1,1), "same" zero padding, square kernel.

    Input/output layout is (batch, channels, height, width); "same"
    padding keeps the spatial size, so a (B, C, H, W) input maps to
    (B, filters, H, W).
    """

    kind = "conv2d"
    param_names = ("W", "b")

    def __init__(self, in_channels: int, filters: int, kernel_size: int = 5,
                 rng: np.random.Generator | None = None):
        if kernel_size % 2 != 1:
            raise DimensionError("same-padded conv needs an odd kernel size")
        self.in_channels = int(in_channels)
        self.filters = int(filters)
        self.kernel_size = int(kernel_size)
        shape = (self.filters, self.in_channels, self.kernel_size, self.kernel_size)
        self.W = np.zeros(shape) if rng is None else glorot_uniform(shape, rng)
        self.b = np.zeros(self.filters)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.in_channels:
            raise DimensionError(
                f"conv2d expects ({self.in_channels}, H, W) input, got {in_shape}"
            )
        return (self.filters,) + tuple(in_shape[1:])

    def _cols(self, x):
        # im2col: one row per output pixel, columns ordered (C, kh, kw).
        b, c, h, w = x.shape
        k = self.kernel_size
        pad = k // 2
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        win = sliding_window_view(xp, (k, k), axis=(2, 3))  # (B, C, H, W, k, k)
        return win.transpose(0, 2, 3, 1, 4, 5).reshape(b * h * w, c * k * k)

    def forward(self, x, record=False):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise DimensionError(
                f"conv2d expects (B, {self.in_channels}, H, W) input, "
                f"got shape {x.shape}"
            )
        b, c, h, w = x.shape
        cols = self._cols(x)
        wmat = self.W.reshape(self.filters, -1)
        out = cols @ wmat.T
        out += self.b
        if record:
            self._cache = (cols, x.shape)
        return out.reshape(b, h, w, self.filters).transpose(0, 3, 1, 2)

    def backward(self, g, need_input_grad=True):
        if self._cache is None:
            raise StateError("conv2d backward called before a recorded forward")
        cols, (b, c, h, w) = self._cache
        self._cache = None
        k = self.kernel_size
        pad = k // 2
        gm = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(-1, self.filters)
        np.matmul(gm.T, cols, out=self.dW.reshape(self.filters, -1))
        np.sum(gm, axis=0, out=self.db)
        if not need_input_grad:
            return None
        wmat = self.W.reshape(self.filters, -1)
        dcols = (gm @ wmat).reshape(b, h, w, c, k, k)
        dxp = np.zeros((b, c, h + 2 * pad, w + 2 * pad))
        for i in range(k):
            for j in range(k):
                dxp[:, :, i:i + h, j:j + w] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return dxp[:, :, pad:pad + h, pad:pad + w]


class MaxPool2D:
    """2x2 max pooling with stride 2; odd spatial dims are ceil-divided.

    Odd inputs are padded on the bottom/right with -inf so the padding
    never wins the max ("same" pooling semantics).
    """

    kind = "maxpool2d"
    param_names = ()

    def __init__(self, pool: int = 2):
        self.pool = int(pool)
        self._cache = None

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise DimensionError(f"maxpool2d expects (C, H, W) input, got {in_shape}")
        c, h, w = in_shape
        return (c, -(-h // self.pool), -(-w // self.pool))

    def forward(self, x, record=False):
        if x.ndim != 4:
            raise DimensionError(f"maxpool2d expects (B, C, H, W) input, got {x.shape}")
        p = self.pool
        b, c, h, w = x.shape
        ho, wo = -(-h // p), -(-w // p)
        if (h % p) or (w % p):
            xp = np.full((b, c, ho * p, wo * p), -np.inf)
            xp[:, :, :h, :w] = x
        else:
            xp = x
        win = (xp.reshape(b, c, ho, p, wo, p)
                 .transpose(0, 1, 2, 4, 3, 5)
                 .reshape(b, c, ho, wo, p * p))
        idx = win.argmax(axis=-1)
        out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
        if record:
            self._cache = (idx, (h, w))
        return out

    def backward(self, g, need_input_grad=True):
        if self._cache is None:
            raise StateError("maxpool2d backward called before a recorded forward")
        idx, (h, w) = self._cache
        self._cache = None
        p = self.pool
        b, c, ho, wo = g.shape
        scatter = np.zeros((b, c, ho, wo, p * p))
        np.put_along_axis(scatter, idx[..., None], g[..., None], axis=-1)
        dxp = (scatter.reshape(b, c, ho, wo, p, p)
                      .transpose(0, 1, 2, 4, 3, 5)
                      .reshape(b, c, ho * p, wo * p))
        return dxp[:, :, :h, :w]


class ReLU:
    kind = "relu"
    param_names = ()

    def __init__(self):
        self._cache = None

    def out_shape(self, in_shape):
        return tuple(in_shape)

    def forward(self, x, record=False):
        if record:
            self._cache = x
        return np.maximum(x, 0.0)

    def backward(self, g, need_input_grad=True):
        if self._cache is None:
            raise StateError("relu backward called before a recorded forward")
        x = self._cache
        self._cache = None
        return g * (x > 0.0)


class Sigmoid:
    kind = "sigmoid"
    param_names = ()

    def __init__(self):
        self._cache = None

    def out_shape(self, in_shape):
        return tuple(in_shape)

    def forward(self, x, record=False):
        out = sigmoid(x)
        if record:
            self._cache = out
        return out

    def backward(self, g, need_input_grad=True):
        if self._cache is None:
            raise StateError("sigmoid backward called before a recorded forward")
        out = self._cache
        self._cache = None
        return g * out * (1.0 - out)


LAYER_KINDS = {cls.kind: cls for cls in (Dense, Conv2D, MaxPool2D, ReLU, Sigmoid)}


class Network:
    """An ordered layer stack sharing flat parameter and gradient buffers."""

    def __init__(self, layers):
        self.layers = list(layers)
        self._pack()
        self._recorded = False

    def _pack(self):
        slots = []
        total = 0
        for layer in self.layers:
            for name in layer.param_names:
                arr = getattr(layer, name)
                slots.append((layer, name, arr))
                total += arr.size
        self.theta = np.empty(total)
        self.grad = np.zeros(total)
        offset = 0
        for layer, name, arr in slots:
            end = offset + arr.size
            self.theta[offset:end] = arr.ravel()
            setattr(layer, name, self.theta[offset:end].reshape(arr.shape))
            setattr(layer, "d" + name, self.grad[offset:end].reshape(arr.shape))
            offset = end

    @property
    def param_count(self) -> int:
        return int(self.theta.size)

    def parameters(self):
        return [getattr(layer, n) for layer in self.layers for n in layer.param_names]

    def gradients(self):
        return [getattr(layer, "d" + n) for layer in self.layers for n in layer.param_names]

    def _promote(self, x):
        """Add a batch axis to a single-sample input; report whether we did."""
        first = self.layers[0]
        if isinstance(first, Dense):
            if x.ndim == 1:
                return x[None, :], True
            return x, False
        # Spatial front end: batches are 4-D (B, C, H, W).
        if x.ndim == 2:
            return x[None, None, :, :], True
        if x.ndim == 3:
            c = getattr(first, "in_channels", 1)
            if x.shape[0] == c:
                return x[None, ...], True
            # A stack of single-channel images: (B, H, W) -> (B, 1, H, W).
            return x[:, None, :, :], False
        return x, False

    def forward(self, x, record: bool = False):
        """Run the stack and return pre-sigmoid logits (or the last layer's output).

        Single samples (no batch axis) come back without a batch axis.
        With record=True the pass is retained so backward() can consume it;
        evaluation passes (the default) leave the network untouched.
        """
        x = np.asarray(x, dtype=np.float64)
        x, promoted = self._promote(x)
        for i, layer in enumerate(self.layers):
            try:
                x = layer.forward(x, record=record)
            except DimensionError as err:
                raise DimensionError(f"layer {i} ({layer.kind}): {err}") from None
        self._recorded = record
        return x[0] if promoted else x

    def backward(self, out_grad):
        """Propagate d(loss)/d(output) back through the recorded pass.

        Fills the flat gradient buffer (and every layer's dW/db views) and
        consumes the recording; a second backward needs a new recorded
        forward.
        """
        if not self._recorded:
            raise StateError("backward requires a recorded forward pass")
        self._recorded = False
        g = np.asarray(out_grad, dtype=np.float64)
        for i in range(len(self.layers) - 1, -1, -1):
            need_input = i > 0
            g = self.layers[i].backward(g, need_input_grad=need_input)
        return g
