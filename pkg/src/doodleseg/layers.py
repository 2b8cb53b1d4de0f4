"""Network primitives on N x H x W x C activations.

Functional operators first (each registers its backward rule on the autograd
tape), then thin parameter-holder classes used to assemble the model. All
convolutions are "same" padded so spatial extent is preserved; the decoder's
skip concatenations rely on that.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .autograd import Tensor, record, relu, sigmoid, ShapeError

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def _check_nhwc(op: str, x: Tensor) -> None:
    if x.data.ndim != 4:
        raise ShapeError(f"{op}: expected N x H x W x C input, got {x.shape}")


# ---------------------------------------------------------------------------
# functional operators


def depthwise_conv3x3(x: Tensor, kernel: Tensor) -> Tensor:
    """Per-channel 3x3 convolution with zero padding; output channel c
    depends only on input channel c."""
    _check_nhwc("depthwise_conv3x3", x)
    if kernel.shape != (3, 3, x.shape[3]):
        raise ShapeError(
            f"depthwise_conv3x3: kernel {kernel.shape} does not match input {x.shape} "
            f"(want (3, 3, {x.shape[3]}))")
    n, h, w, c = x.shape
    xp = np.pad(x.data, ((0, 0), (1, 1), (1, 1), (0, 0)))
    out = np.zeros_like(x.data)
    tmp = np.empty_like(x.data)
    k = kernel.data
    for di in range(3):
        for dj in range(3):
            np.multiply(xp[:, di:di + h, dj:dj + w, :], k[di, dj], out=tmp)
            out += tmp

    def back(g):
        gxp = np.zeros_like(xp)
        gk = np.zeros_like(k)
        buf = np.empty_like(g)
        for di in range(3):
            for dj in range(3):
                np.multiply(g, k[di, dj], out=buf)
                gxp[:, di:di + h, dj:dj + w, :] += buf
                gk[di, dj] = np.einsum("nhwc,nhwc->c", xp[:, di:di + h, dj:dj + w, :], g)
        return gxp[:, 1:1 + h, 1:1 + w, :], gk

    return record(Tensor(out, dtype=x.dtype), (x, kernel), back)


def pointwise_conv(x: Tensor, kernel: Tensor) -> Tensor:
    """1x1 convolution: per-pixel linear map over channels."""
    _check_nhwc("pointwise_conv", x)
    if kernel.data.ndim != 4 or kernel.shape[:2] != (1, 1) or kernel.shape[2] != x.shape[3]:
        raise ShapeError(
            f"pointwise_conv: kernel {kernel.shape} does not match input {x.shape} "
            f"(want (1, 1, {x.shape[3]}, Cout))")
    n, h, w, cin = x.shape
    cout = kernel.shape[3]
    kmat = kernel.data.reshape(cin, cout)
    out = (x.data.reshape(-1, cin) @ kmat).reshape(n, h, w, cout)

    def back(g):
        gm = g.reshape(-1, cout)
        gx = (gm @ kmat.T).reshape(x.shape)
        gk = (x.data.reshape(-1, cin).T @ gm).reshape(kernel.shape)
        return gx, gk

    return record(Tensor(out, dtype=x.dtype), (x, kernel), back)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor,
               running_mean: np.ndarray, running_var: np.ndarray,
               training: bool, momentum: float = BN_MOMENTUM,
               eps: float = BN_EPS) -> Tensor:
    """Per-channel normalization over N, H, W.

    Train mode normalizes by batch statistics and updates the running stats
    in place (exponential moving average, biased variance). Infer mode uses
    the running stats and mutates nothing.
    """
    _check_nhwc("batch_norm", x)
    c = x.shape[3]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batch_norm: gamma/beta {gamma.shape}/{beta.shape} vs C={c}")
    m = x.shape[0] * x.shape[1] * x.shape[2]
    if training:
        if m < 2:
            raise ShapeError(f"batch_norm: train mode needs N*H*W >= 2, got {m}")
        mean = x.data.mean(axis=(0, 1, 2))
        xc = x.data - mean
        var = np.square(xc).mean(axis=(0, 1, 2))
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = xc
        xhat *= inv_std
    else:
        mean = running_mean.astype(x.dtype)
        var = running_var.astype(x.dtype)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mean) * inv_std
    out = xhat * gamma.data + beta.data

    def back(g):
        dgamma = np.einsum("nhwc,nhwc->c", g, xhat)
        dbeta = g.sum(axis=(0, 1, 2))
        dxhat = g * gamma.data
        if training:
            # batch statistics depend on x, so the normalizer terms appear
            dx = (inv_std / m) * (m * dxhat
                                  - dxhat.sum(axis=(0, 1, 2))
                                  - xhat * np.einsum("nhwc,nhwc->c", dxhat, xhat))
        else:
            dx = dxhat * inv_std
        return dx.astype(x.dtype), dgamma, dbeta

    return record(Tensor(out, dtype=x.dtype), (x, gamma, beta), back)


def max_pool_2x2(x: Tensor) -> Tensor:
    """Max over disjoint 2x2 windows; H and W must be even."""
    _check_nhwc("max_pool_2x2", x)
    n, h, w, c = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"max_pool_2x2: odd spatial dims in {x.shape}")
    h2, w2 = h // 2, w // 2
    win = x.data.reshape(n, h2, 2, w2, 2, c).transpose(0, 1, 3, 5, 2, 4).reshape(n, h2, w2, c, 4)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def back(g):
        gwin = np.zeros_like(win)
        np.put_along_axis(gwin, idx[..., None], g[..., None], axis=-1)
        gx = gwin.reshape(n, h2, w2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(x.shape)
        return (gx,)

    return record(Tensor(out, dtype=x.dtype), (x,), back)


def upsample_2x2(x: Tensor) -> Tensor:
    """Nearest-neighbor upsampling: each pixel becomes a constant 2x2 block."""
    _check_nhwc("upsample_2x2", x)
    n, h, w, c = x.shape
    out = np.repeat(np.repeat(x.data, 2, axis=1), 2, axis=2)

    def back(g):
        return (g.reshape(n, h, 2, w, 2, c).sum(axis=(2, 4)).astype(x.dtype),)

    return record(Tensor(out, dtype=x.dtype), (x,), back)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Channel concatenation: a occupies [0, Ca), b occupies [Ca, Ca+Cb)."""
    _check_nhwc("concat_channels", a)
    _check_nhwc("concat_channels", b)
    if a.shape[:3] != b.shape[:3]:
        raise ShapeError(f"concat_channels: spatial mismatch {a.shape} vs {b.shape}")
    ca = a.shape[3]
    out = np.concatenate([a.data, b.data], axis=3)

    def back(g):
        return g[..., :ca], g[..., ca:]

    return record(Tensor(out, dtype=a.dtype), (a, b), back)


def global_avg_pool(x: Tensor) -> Tensor:
    """N x H x W x C -> N x C mean over the spatial extent."""
    _check_nhwc("global_avg_pool", x)
    n, h, w, c = x.shape
    out = x.data.mean(axis=(1, 2))

    def back(g):
        return (np.broadcast_to(g[:, None, None, :] / (h * w), x.shape).astype(x.dtype),)

    return record(Tensor(out, dtype=x.dtype), (x,), back)


def fully_connected(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """N x Cin -> N x Cout affine map."""
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeError(f"fully_connected: {x.shape} @ {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise ShapeError(f"fully_connected: bias {bias.shape} vs Cout={weight.shape[1]}")
    out = x.data @ weight.data + bias.data

    def back(g):
        return g @ weight.data.T, x.data.T @ g, g.sum(axis=0)

    return record(Tensor(out, dtype=x.dtype), (x, weight, bias), back)


def scale_channels(x: Tensor, s: Tensor) -> Tensor:
    """Multiply each channel of x (N x H x W x C) by the gate s (N x C)."""
    _check_nhwc("scale_channels", x)
    if s.shape != (x.shape[0], x.shape[3]):
        raise ShapeError(f"scale_channels: gate {s.shape} vs input {x.shape}")
    out = x.data * s.data[:, None, None, :]

    def back(g):
        return g * s.data[:, None, None, :], np.einsum("nhwc,nhwc->nc", g, x.data)

    return record(Tensor(out, dtype=x.dtype), (x, s), back)


# ---------------------------------------------------------------------------
# parameter holders


def he_uniform(rng: np.random.Generator, shape: tuple, fan_in: int,
               dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base: children discovered by attribute scan, in definition order."""

    def parameters(self) -> Iterator[Tensor]:
        for _, p in self.named_parameters():
            yield p

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, val in vars(self).items():
            path = f"{prefix}.{key}" if prefix else key
            if isinstance(val, Tensor) and val.requires_grad:
                yield path, val
            elif isinstance(val, Layer):
                yield from val.named_parameters(path)

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for key, val in vars(self).items():
            path = f"{prefix}.{key}" if prefix else key
            if isinstance(val, Layer):
                yield from val.named_buffers(path)
            elif isinstance(val, np.ndarray) and key.startswith("running_"):
                yield path, val


class DepthwiseConv3x3(Layer):
    def __init__(self, channels: int, rng: np.random.Generator):
        self.kernel = Tensor(he_uniform(rng, (3, 3, channels), fan_in=9),
                             requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return depthwise_conv3x3(x, self.kernel)


class PointwiseConv(Layer):
    def __init__(self, cin: int, cout: int, rng: np.random.Generator):
        self.kernel = Tensor(he_uniform(rng, (1, 1, cin, cout), fan_in=cin),
                             requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return pointwise_conv(x, self.kernel)


class BatchNorm(Layer):
    def __init__(self, channels: int):
        self.gamma = Tensor(np.ones(channels, dtype=np.float32), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=np.float32), requires_grad=True)
        self.running_mean = np.zeros(channels, dtype=np.float32)
        self.running_var = np.ones(channels, dtype=np.float32)

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        return batch_norm(x, self.gamma, self.beta,
                          self.running_mean, self.running_var, training)


class Dense(Layer):
    def __init__(self, cin: int, cout: int, rng: np.random.Generator):
        self.weight = Tensor(he_uniform(rng, (cin, cout), fan_in=cin),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(cout, dtype=np.float32), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return fully_connected(x, self.weight, self.bias)


class SEBlock(Layer):
    """Squeeze-and-excitation channel gate.

    Hidden width is max(1, floor(C / reduction)) so small channel counts
    still get a one-unit bottleneck.
    """

    def __init__(self, channels: int, reduction: int, rng: np.random.Generator):
        self.hidden = max(1, channels // reduction)
        self.squeeze = Dense(channels, self.hidden, rng)
        self.excite = Dense(self.hidden, channels, rng)

    def __call__(self, x: Tensor) -> Tensor:
        s = global_avg_pool(x)
        s = relu(self.squeeze(s))
        s = sigmoid(self.excite(s))
        return scale_channels(x, s)
