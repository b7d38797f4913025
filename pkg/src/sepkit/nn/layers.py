"""Layers: 2-D convolution, batch normalization, fully-connected,
global average pooling, and the SGD update.

Convolutions use the cross-correlation convention with "same" padding:
out = ceil(in/stride) per axis, total pad = max((out-1)*stride + k - in, 0),
split floor-left/ceil-right. The forward lowers to im2col + matmul; the
backward recomputes the patch matrix from the saved padded input instead
of keeping it alive in the graph.
"""

from __future__ import annotations

import numpy as np

from sepkit.errors import DegenerateBatch, MissingGrad, ShapeMismatch
from sepkit.nn import kernels
from sepkit.nn.tensor import Tensor

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def he_normal(shape, fan_in, rng, dtype) -> np.ndarray:
    """He-normal init, std = sqrt(2/fan_in). Suits the all-ReLU stack."""
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Conv2dLayer:
    """Weights for conv2d: kernel (out_ch, in_ch, kh, kw) plus bias."""

    def __init__(self, in_ch, out_ch, kernel, stride, rng,
                 dtype=np.float32, zero_init=False):
        kh, kw = kernel
        st, sf = stride
        if min(kh, kw, st, sf) < 1:
            raise ValueError("kernel and stride entries must be >= 1")
        fan_in = in_ch * kh * kw
        if zero_init:
            w = np.zeros((out_ch, in_ch, kh, kw), dtype=dtype)
        else:
            w = he_normal((out_ch, in_ch, kh, kw), fan_in, rng, dtype)
        self.kernel = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_ch, dtype=dtype), requires_grad=True)
        self.stride = (st, sf)

    @property
    def in_ch(self):
        return self.kernel.data.shape[1]

    @property
    def out_ch(self):
        return self.kernel.data.shape[0]

    def params(self):
        return [self.kernel, self.bias]


def same_pad(size: int, k: int, stride: int) -> tuple[int, int, int]:
    """(out_size, pad_before, pad_after) for "same" padding on one axis."""
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    before = total // 2
    return out, before, total - before


def conv2d(x: Tensor, layer: Conv2dLayer) -> Tensor:
    """Cross-correlate (N,C,H,W) input with the layer kernel, same padding.

    Lowered to one (N*OH*OW, C*kh*kw) patch matrix and a single GEMM per
    pass; that orientation keeps the long axis leading, which is what the
    BLAS prefers for the narrow channel counts of early blocks.
    """
    n, c, h, w = x.data.shape
    out_ch, in_ch, kh, kw = layer.kernel.data.shape
    if c != in_ch:
        raise ShapeMismatch(f"input has {c} channels, kernel expects {in_ch}")
    st, sf = layer.stride
    oh, ph0, ph1 = same_pad(h, kh, st)
    ow, pw0, pw1 = same_pad(w, kw, sf)
    if ph0 or ph1 or pw0 or pw1:
        xp = np.pad(x.data, ((0, 0), (0, 0), (ph0, ph1), (pw0, pw1)))
    else:
        xp = np.ascontiguousarray(x.data)
    col = kernels.im2col(xp, kh, kw, st, sf, oh, ow)
    # (out, C*kh*kw) view; BLAS takes the transpose without a copy.
    w2 = layer.kernel.data.reshape(out_ch, in_ch * kh * kw)
    y2 = col @ w2.T
    y2 += layer.bias.data
    y = np.ascontiguousarray(y2.reshape(n, oh, ow, out_ch).transpose(0, 3, 1, 2))
    kernel, bias = layer.kernel, layer.bias

    def back(g):
        g2 = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(-1, out_ch)
        if kernel.requires_grad:
            dw = (g2.T @ col).reshape(kernel.data.shape)
            kernel.accumulate_fresh(dw)
        if bias.requires_grad:
            bias.accumulate_fresh(g2.sum(axis=0))
        if x.requires_grad:
            dcol = g2 @ w2
            dxp = kernels.col2im(dcol, n, c, xp.shape[2], xp.shape[3],
                                 kh, kw, st, sf, oh, ow)
            if ph0 or ph1 or pw0 or pw1:
                x.accumulate(dxp[:, :, ph0:ph0 + h, pw0:pw0 + w])
            else:
                x.accumulate_fresh(dxp)

    return Tensor._make(y, (x, kernel, bias), back)


class BatchNormLayer:
    """Per-channel batch normalization state.

    gamma/beta are trainable; running mean/var follow the batch statistics
    with momentum 0.9 (new = 0.9*old + 0.1*batch) and are used verbatim in
    infer mode. Variance is the biased estimator.
    """

    def __init__(self, ch, eps=BN_EPS, momentum=BN_MOMENTUM, dtype=np.float32):
        self.gamma = Tensor(np.ones(ch, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(ch, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(ch, dtype=dtype)
        self.running_var = np.ones(ch, dtype=dtype)
        self.eps = eps
        self.momentum = momentum
        self.mode = "train"

    def params(self):
        return [self.gamma, self.beta]


def batch_norm(x: Tensor, layer: BatchNormLayer) -> Tensor:
    """Normalize (N,C,H,W) per channel, then scale/shift by gamma/beta."""
    n, c, h, w = x.data.shape
    if c != layer.gamma.data.shape[0]:
        raise ShapeMismatch(f"{c} channels vs {layer.gamma.data.shape[0]} norms")
    gamma, beta = layer.gamma, layer.beta
    m = n * h * w
    if layer.mode == "train":
        if m < 2:
            raise DegenerateBatch("batch normalization needs N*H*W >= 2")
        mu = np.einsum("nchw->c", x.data) / m
        d = x.data - mu[:, None, None]
        # Two-pass variance: einsum fuses the square and the reduction.
        var = np.einsum("nchw,nchw->c", d, d) / m
        mom = layer.momentum
        layer.running_mean = (mom * layer.running_mean
                              + (1.0 - mom) * mu).astype(layer.running_mean.dtype)
        layer.running_var = (mom * layer.running_var
                             + (1.0 - mom) * var).astype(layer.running_var.dtype)
    else:
        var = layer.running_var
        d = x.data - layer.running_mean[:, None, None]
    inv = 1.0 / np.sqrt(var + layer.eps)
    # y = gamma * (d * inv) + beta, with the channel scales folded so the
    # normalized activations are never materialized; backward rebuilds the
    # few reductions it needs from d directly.
    y = d * (gamma.data * inv)[:, None, None]
    y += beta.data[:, None, None]
    train = layer.mode == "train"

    def back(g):
        gd = np.einsum("nchw,nchw->c", g, d)
        gsum = np.einsum("nchw->c", g)
        if gamma.requires_grad:
            gamma.accumulate_fresh(gd * inv)
        if beta.requires_grad:
            beta.accumulate_fresh(gsum)
        if x.requires_grad:
            gi = gamma.data * inv
            if train:
                dx = g * gi[:, None, None]
                dx -= d * (gi * inv * inv * gd / m)[:, None, None]
                dx -= (gi * gsum / m)[:, None, None]
                x.accumulate_fresh(dx)
            else:
                x.accumulate_fresh(g * gi[:, None, None])

    return Tensor._make(y, (x, gamma, beta), back)


class LinearLayer:
    """Fully-connected weights: weight (out_dim, in_dim) plus bias."""

    def __init__(self, in_dim, out_dim, rng, dtype=np.float32, zero_init=False):
        if in_dim < 1 or out_dim < 1:
            raise ValueError("dimensions must be positive")
        if zero_init:
            w = np.zeros((out_dim, in_dim), dtype=dtype)
        else:
            w = he_normal((out_dim, in_dim), in_dim, rng, dtype)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim, dtype=dtype), requires_grad=True)

    def params(self):
        return [self.weight, self.bias]


def linear(x: Tensor, layer: LinearLayer) -> Tensor:
    """y = x @ W.T + b for (N, in_dim) input."""
    if x.data.ndim != 2 or x.data.shape[1] != layer.weight.data.shape[1]:
        raise ShapeMismatch(
            f"input {x.data.shape} vs weight {layer.weight.data.shape}"
        )
    weight, bias = layer.weight, layer.bias
    y = x.data @ weight.data.T + bias.data

    def back(g):
        if weight.requires_grad:
            weight.accumulate_fresh(g.T @ x.data)
        if bias.requires_grad:
            bias.accumulate_fresh(g.sum(axis=0))
        if x.requires_grad:
            x.accumulate_fresh(g @ weight.data)

    return Tensor._make(y, (x, weight, bias), back)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the spatial axes: (N,C,H,W) -> (N,C)."""
    if x.data.ndim != 4:
        raise ShapeMismatch(f"expected (N,C,H,W), got {x.data.shape}")
    return x.mean(axis=(2, 3))


def sgd_step(params, lr: float) -> None:
    """p <- p - lr*grad for every parameter, then zero the grads."""
    for p in params:
        if p.grad is None:
            raise MissingGrad("parameter has no gradient; run backward first")
    for p in params:
        p.data -= (lr * p.grad).astype(p.data.dtype, copy=False)
        p.zero_grad()
