"""Differentiable layers: conv, relu, maxpool, dropout, batchnorm, flatten,
dense, and the softmax cross-entropy loss.

Every layer caches whatever its backward pass needs during forward and
invalidates that cache once backward has consumed it, so a stale or missing
cache raises StateError instead of producing silent garbage. Weight
gradients are *accumulated* into ``layer.grads`` (the optimizer zeroes them
after each step), which lets the dual-path model fold both branches'
contributions into the shared trunk.

Convolution is cross-correlation (no kernel flip), evaluated through an
im2col rewrite. The forward matmul is batched per sample so that a sample's
activations do not depend on which batch it rides in; the dual-path
equivalence tests rely on that bit-stability.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError, ParameterError, ShapeError, StateError
from .tensor import DTYPE, matmul, pad2d


class Layer:
    """Base layer: parameter/gradient dicts plus forward/backward cache."""

    kind = "layer"

    def __init__(self):
        self.params = {}
        self.grads = {}
        self.training = True

        self._cache = None

    def forward(self, x):
        raise NotImplementedError

    def backward(self, upstream):
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise StateError(f"{self.kind}: backward called without a fresh forward")
        cache, self._cache = self._cache, None
        return cache

    def zero_grads(self):
        for g in self.grads.values():
            g[...] = 0

    def param_count(self):
        return sum(int(p.size) for p in self.params.values())

    def state_tensors(self):
        """Non-trainable tensors that belong in a checkpoint (e.g. running stats)."""
        return {}

    def _new_param(self, name, value):
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)


class Conv2d(Layer):
    """3x3 (or k x k) cross-correlation with per-channel bias.

    Weights are (out_channels, in_channels, k, k), He-initialized with
    std = sqrt(2 / fan_in). Output height is (h + 2p - k) / s + 1 and must
    be integral.
    """

    kind = "conv2d"

    def __init__(self, in_channels, out_channels, kernel_size=3, padding=1,
                 stride=1, rng=None, dtype=DTYPE):
        super().__init__()
        if stride < 1:
            raise ParameterError(f"stride must be >= 1, got {stride}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.padding = padding
        self.stride = stride
        rng = rng or np.random.default_rng()
        std = np.sqrt(2.0 / (in_channels * kernel_size * kernel_size))
        weight = rng.normal(0.0, std, size=(out_channels, in_channels, kernel_size, kernel_size))
        self._new_param("weight", weight.astype(dtype))
        self._new_param("bias", np.zeros(out_channels, dtype=dtype))

    def _output_size(self, h, w):
        k, p, s = self.kernel_size, self.padding, self.stride
        if (h + 2 * p - k) % s or (w + 2 * p - k) % s:
            raise ShapeError(
                f"conv2d output size not integral for input {h}x{w} "
                f"(kernel {k}, padding {p}, stride {s})")
        oh = (h + 2 * p - k) // s + 1
        ow = (w + 2 * p - k) // s + 1
        if oh < 1 or ow < 1:
            raise ShapeError(f"kernel does not fit padded {h}x{w} input")
        return oh, ow

    def forward(self, x):
        b, cin, h, w = x.shape
        if cin != self.in_channels:
            raise ShapeError(f"conv2d expects {self.in_channels} input channels, got {cin}")
        k, s = self.kernel_size, self.stride
        oh, ow = self._output_size(h, w)

        xp = pad2d(x, self.padding, "zero")
        windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s]
        # (b, oh*ow, cin*k*k); batched matmul keeps each sample's GEMM
        # independent of the batch it sits in (bit-stable per sample)
        cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b, oh * ow, cin * k * k)
        wmat = self.params["weight"].reshape(self.out_channels, -1).T
        out = cols @ wmat + self.params["bias"]
        out = out.reshape(b, oh, ow, self.out_channels).transpose(0, 3, 1, 2)

        self._cache = (cols, x.shape)
        return out

    def backward(self, upstream):
        cols, (b, cin, h, w) = self._take_cache()
        k, p, s = self.kernel_size, self.padding, self.stride
        cout = self.out_channels
        _, _, oh, ow = upstream.shape

        up = upstream.transpose(0, 2, 3, 1).reshape(-1, cout)
        cols2 = cols.reshape(-1, cin * k * k)
        self.grads["weight"] += matmul(up.T, cols2).reshape(self.params["weight"].shape)
        self.grads["bias"] += up.sum(axis=0)

        dcols = matmul(up, self.params["weight"].reshape(cout, -1))
        dcols = dcols.reshape(b, oh, ow, cin, k, k)
        dxp = np.zeros((b, cin, h + 2 * p, w + 2 * p), dtype=upstream.dtype)
        for ki in range(k):
            for kj in range(k):
                dxp[:, :, ki:ki + s * oh:s, kj:kj + s * ow:s] += \
                    dcols[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
        if p:
            return np.ascontiguousarray(dxp[:, :, p:p + h, p:p + w])
        return dxp


class ReLU(Layer):
    kind = "relu"

    def forward(self, x):
        self._cache = x > 0  # x == 0 routes zero gradient
        return np.maximum(x, 0)

    def backward(self, upstream):
        mask = self._take_cache()
        return upstream * mask


class MaxPool2x2(Layer):
    """2x2 max pooling with stride 2; ties go to the first element in
    row-major window order. Argmax indices are cached for backward."""

    kind = "maxpool2x2"

    def forward(self, x):
        b, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ShapeError(f"maxpool2x2 needs even spatial dims, got {h}x{w}")
        oh, ow = h // 2, w // 2
        windows = x.reshape(b, c, oh, 2, ow, 2).transpose(0, 1, 2, 4, 3, 5)
        windows = windows.reshape(b, c, oh, ow, 4)
        idx = windows.argmax(axis=4)
        out = np.take_along_axis(windows, idx[..., None], axis=4)[..., 0]
        self._cache = (idx, (h, w))
        return out

    def backward(self, upstream):
        idx, (h, w) = self._take_cache()
        b, c, oh, ow = upstream.shape
        dwin = np.zeros((b, c, oh, ow, 4), dtype=upstream.dtype)
        np.put_along_axis(dwin, idx[..., None], upstream[..., None], axis=4)
        dwin = dwin.reshape(b, c, oh, ow, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return dwin.reshape(b, c, h, w)


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by 1/(1-p) at train time so
    that evaluation is the exact identity."""

    kind = "dropout"

    def __init__(self, p, rng=None):
        super().__init__()
        if not 0.0 <= p < 1.0:
            raise ParameterError(f"dropout probability must be in [0, 1), got {p}")
        self.p = p
        self.rng = rng or np.random.default_rng()

    def reseed(self, seed):
        self.rng = np.random.default_rng(seed)

    def forward(self, x):
        if not self.training:
            self._cache = ("eval",)
            return x
        if self.p == 0.0:
            self._cache = ("identity",)
            return x
        keep = self.rng.random(x.shape) >= self.p
        mask = keep.astype(x.dtype) / (1.0 - self.p)
        self._cache = ("mask", mask)
        return x * mask

    def backward(self, upstream):
        cache = self._take_cache()
        if cache[0] == "mask":
            return upstream * cache[1]
        return upstream


class BatchNorm(Layer):
    """Batch normalization over (b, c, h, w) or (b, f) inputs.

    Train mode normalizes per channel with the batch mean and *biased*
    variance, then updates the running statistics with an exponential
    moving average: running = momentum * running + (1 - momentum) * batch.
    Eval mode normalizes with the running statistics. Backward works in
    both modes (the eval path is a plain affine map).
    """

    kind = "batchnorm"

    def __init__(self, num_features, eps=1e-5, momentum=0.9, dtype=DTYPE):
        super().__init__()
        self.num_features = num_features
        self.eps = eps
        self.momentum = momentum
        self._new_param("gamma", np.ones(num_features, dtype=dtype))
        self._new_param("beta", np.zeros(num_features, dtype=dtype))
        self.running_mean = np.zeros(num_features, dtype=dtype)
        self.running_var = np.ones(num_features, dtype=dtype)

    def state_tensors(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def _layout(self, x):
        if x.ndim == 4:
            c = x.shape[1]
            axes, pshape = (0, 2, 3), (1, c, 1, 1)
        elif x.ndim == 2:
            c = x.shape[1]
            axes, pshape = (0,), (1, c)
        else:
            raise ShapeError(f"batchnorm expects (b, c, h, w) or (b, f), got shape {x.shape}")
        if c != self.num_features:
            raise ShapeError(f"batchnorm built for {self.num_features} channels, got {c}")
        return axes, pshape

    def forward(self, x):
        axes, pshape = self._layout(x)
        gamma = self.params["gamma"].reshape(pshape)
        beta = self.params["beta"].reshape(pshape)
        if self.training:
            if x.shape[0] < 2:
                raise ParameterError(
                    f"batchnorm train mode needs batch size >= 2, got {x.shape[0]}")
            mean = x.mean(axis=axes, keepdims=True)
            var = x.var(axis=axes, keepdims=True)  # biased
            inv = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean) * inv
            m = self.momentum
            self.running_mean = (m * self.running_mean
                                 + (1.0 - m) * mean.reshape(-1)).astype(x.dtype)
            self.running_var = (m * self.running_var
                                + (1.0 - m) * var.reshape(-1)).astype(x.dtype)
            self._cache = (xhat, inv, axes, pshape, "train")
        else:
            inv = 1.0 / np.sqrt(self.running_var.reshape(pshape) + self.eps)
            xhat = (x - self.running_mean.reshape(pshape)) * inv
            self._cache = (xhat, inv, axes, pshape, "eval")
        return gamma * xhat + beta

    def backward(self, upstream):
        xhat, inv, axes, pshape, mode = self._take_cache()
        gamma = self.params["gamma"].reshape(pshape)
        self.grads["gamma"] += (upstream * xhat).sum(axis=axes)
        self.grads["beta"] += upstream.sum(axis=axes)
        if mode == "eval":
            return upstream * gamma * inv
        m = upstream.size // self.num_features  # samples per channel
        dxhat = upstream * gamma
        return (inv / m) * (m * dxhat
                            - dxhat.sum(axis=axes, keepdims=True)
                            - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True))


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, upstream):
        shape = self._take_cache()
        return upstream.reshape(shape)


class Dense(Layer):
    """Affine map x @ W + b with W shaped (in_features, out_features)."""

    kind = "dense"

    def __init__(self, in_features, out_features, rng=None, dtype=DTYPE):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        rng = rng or np.random.default_rng()
        std = np.sqrt(2.0 / in_features)
        weight = rng.normal(0.0, std, size=(in_features, out_features))
        self._new_param("weight", weight.astype(dtype))
        self._new_param("bias", np.zeros(out_features, dtype=dtype))

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(
                f"dense expects (b, {self.in_features}) input, got shape {x.shape}")
        self._cache = x
        return matmul(x, self.params["weight"]) + self.params["bias"]

    def backward(self, upstream):
        x = self._take_cache()
        self.grads["weight"] += matmul(x.T, upstream)
        self.grads["bias"] += upstream.sum(axis=0)
        return matmul(upstream, self.params["weight"].T)


class LossValue:
    """Scalar cross-entropy loss plus the gradient w.r.t. the logits."""

    __slots__ = ("loss", "dlogits")

    def __init__(self, loss, dlogits):
        self.loss = loss
        self.dlogits = dlogits


def softmax_cross_entropy(logits, labels):
    """Mean over the batch of -log softmax(logits)[label].

    Computed with max subtraction for stability; the returned gradient is
    (softmax - onehot) / batch_size.
    """
    logits = np.asarray(logits)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be (b, k), got shape {logits.shape}")
    b, k = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (b,):
        raise ShapeError(f"labels must be shape ({b},), got {labels.shape}")
    if labels.min() < 0 or labels.max() >= k:
        raise DataError(f"labels must lie in [0, {k}), got range "
                        f"[{labels.min()}, {labels.max()}]")
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    loss = float(-logp[np.arange(b), labels].mean())
    grad = np.exp(logp)
    grad[np.arange(b), labels] -= 1.0
    grad /= b
    return LossValue(loss, grad.astype(logits.dtype))
