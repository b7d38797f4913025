"""Residual blocks and speaker-embedding conditioning.

A block is conv -> bn -> relu -> conv -> (+ shortcut) -> bn -> relu, with
the block's stride in the first convolution only. The shortcut is a 1x1
convolution with the block stride whenever the channel count or spatial
size changes, else the identity.

Conditioning projects the two speaker embeddings to the block's channel
count and adds them at every spatial location, once per convolution. The
injection point is configurable: post_conv adds before the following batch
norm (which can largely cancel a per-channel offset), post_bn adds after
it, just before the ReLU.
"""

from __future__ import annotations

import numpy as np

from sepkit.errors import ShapeMismatch
from sepkit.nn import (
    BatchNormLayer,
    Conv2dLayer,
    LinearLayer,
    Tensor,
    batch_norm,
    conv2d,
    linear,
    relu,
)


class ResidualBlock:
    def __init__(self, in_ch, out_ch, kernel, stride, rng, dtype=np.float32):
        stride = (int(stride[0]), int(stride[1]))
        self.conv1 = Conv2dLayer(in_ch, out_ch, kernel, stride, rng, dtype)
        self.conv2 = Conv2dLayer(out_ch, out_ch, kernel, (1, 1), rng, dtype)
        self.bn_mid = BatchNormLayer(out_ch, dtype=dtype)
        self.bn_out = BatchNormLayer(out_ch, dtype=dtype)
        if in_ch != out_ch or stride != (1, 1):
            self.shortcut = Conv2dLayer(in_ch, out_ch, (1, 1), stride, rng, dtype)
        else:
            self.shortcut = None

    def layers(self):
        out = [("conv1", self.conv1), ("conv2", self.conv2),
               ("bn_mid", self.bn_mid), ("bn_out", self.bn_out)]
        if self.shortcut is not None:
            out.append(("shortcut", self.shortcut))
        return out


class BlockConditioning:
    """Four projections per block: target and interference embeddings,
    one pair per convolution."""

    def __init__(self, embed_dim, out_ch, rng, dtype=np.float32):
        self.proj1_t = LinearLayer(embed_dim, out_ch, rng, dtype)
        self.proj1_i = LinearLayer(embed_dim, out_ch, rng, dtype)
        self.proj2_t = LinearLayer(embed_dim, out_ch, rng, dtype)
        self.proj2_i = LinearLayer(embed_dim, out_ch, rng, dtype)

    def layers(self):
        return [("proj1_t", self.proj1_t), ("proj1_i", self.proj1_i),
                ("proj2_t", self.proj2_t), ("proj2_i", self.proj2_i)]


def condition(feature_map: Tensor, tgt: Tensor, itf: Tensor,
              proj_t: LinearLayer, proj_i: LinearLayer) -> Tensor:
    """Add both projected embeddings to every spatial location."""
    n, c = feature_map.data.shape[:2]
    if proj_t.weight.data.shape[0] != c or proj_i.weight.data.shape[0] != c:
        raise ShapeMismatch(
            f"projections emit {proj_t.weight.data.shape[0]} dims for {c} channels"
        )
    pt = linear(tgt, proj_t).reshape(n, c, 1, 1)
    pi = linear(itf, proj_i).reshape(n, c, 1, 1)
    return feature_map + pt + pi


def residual_block_forward(x: Tensor, block: ResidualBlock, cond=None,
                           injection_point: str = "post_bn") -> Tensor:
    """Run one block; cond is an optional (tgt, itf, BlockConditioning)."""
    h = conv2d(x, block.conv1)
    if cond is not None and injection_point == "post_conv":
        h = condition(h, cond[0], cond[1], cond[2].proj1_t, cond[2].proj1_i)
    h = batch_norm(h, block.bn_mid)
    if cond is not None and injection_point == "post_bn":
        h = condition(h, cond[0], cond[1], cond[2].proj1_t, cond[2].proj1_i)
    h = relu(h)
    h = conv2d(h, block.conv2)
    if cond is not None and injection_point == "post_conv":
        h = condition(h, cond[0], cond[1], cond[2].proj2_t, cond[2].proj2_i)
    sc = x if block.shortcut is None else conv2d(x, block.shortcut)
    h = batch_norm(h + sc, block.bn_out)
    if cond is not None and injection_point == "post_bn":
        h = condition(h, cond[0], cond[1], cond[2].proj2_t, cond[2].proj2_i)
    return relu(h)
