"""The full separation model: two weight-independent embedding
subnetworks and the conditioned separation subnetwork.

Embedding path: (N,1,context,201) -> 4 residual blocks -> global average
pool -> (N, embed_dim). Separation path: (N,1,segment,201) -> 8 residual
blocks, each conditioned on both embeddings -> flatten -> fully-connected
to 201 outputs. The final layer starts at zero so the untrained model is
the identity on the mixture's central frame.
"""

from __future__ import annotations

import numpy as np

from sepkit.errors import BadCheckpoint, ConfigMismatch, ShapeMismatch
from sepkit.model.blocks import BlockConditioning, ResidualBlock, residual_block_forward
from sepkit.model.config import ModelConfig
from sepkit.nn import (
    LinearLayer,
    Tensor,
    global_avg_pool,
    linear,
    load_checkpoint,
    save_checkpoint,
)


def _build_blocks(block_specs, cfg, rng, dtype):
    blocks = []
    in_ch = 1
    for kernel, stride, ch in block_specs:
        out_ch = cfg.scaled(ch)
        blocks.append(ResidualBlock(in_ch, out_ch, kernel, stride, rng, dtype))
        in_ch = out_ch
    return blocks


class EmbeddingNet:
    def __init__(self, cfg: ModelConfig, rng, dtype=np.float32):
        self.cfg = cfg
        self.blocks = _build_blocks(cfg.embed_blocks, cfg, rng, dtype)

    def forward(self, ctx: Tensor) -> Tensor:
        """(N, 1, context_frames, n_freq) -> (N, embed_dim)."""
        n, c, t, f = ctx.data.shape
        if c != 1 or t != self.cfg.context_frames or f != self.cfg.n_freq:
            raise ShapeMismatch(
                f"context must be (N,1,{self.cfg.context_frames},{self.cfg.n_freq}),"
                f" got {ctx.data.shape}"
            )
        h = ctx
        for block in self.blocks:
            h = residual_block_forward(h, block)
        return global_avg_pool(h)

    def state_entries(self, prefix):
        out = []
        for bi, block in enumerate(self.blocks):
            for lname, layer in block.layers():
                out.extend(_layer_entries(f"{prefix}.b{bi}.{lname}", layer))
        return out


class SeparationNet:
    def __init__(self, cfg: ModelConfig, rng, dtype=np.float32):
        self.cfg = cfg
        self.blocks = _build_blocks(cfg.sep_blocks, cfg, rng, dtype)
        edim = cfg.effective_embed_dim
        self.conds = [BlockConditioning(edim, cfg.scaled(ch), rng, dtype)
                      for _k, _s, ch in cfg.sep_blocks]
        self.fc = LinearLayer(cfg.flatten_size, cfg.n_freq, rng, dtype,
                              zero_init=True)

    def forward(self, seg: Tensor, tgt: Tensor, itf: Tensor) -> Tensor:
        """(N,1,segment,201) + two (N,embed_dim) -> (N, 201) residual frame."""
        n, c, t, f = seg.data.shape
        if c != 1 or t != self.cfg.segment_frames or f != self.cfg.n_freq:
            raise ShapeMismatch(
                f"segment must be (N,1,{self.cfg.segment_frames},{self.cfg.n_freq}),"
                f" got {seg.data.shape}"
            )
        h = seg
        for block, cond in zip(self.blocks, self.conds):
            h = residual_block_forward(h, block, (tgt, itf, cond),
                                       self.cfg.injection_point)
        flat = h.reshape(n, self.cfg.flatten_size)
        return linear(flat, self.fc)

    def state_entries(self, prefix):
        out = []
        for bi, (block, cond) in enumerate(zip(self.blocks, self.conds)):
            for lname, layer in block.layers():
                out.extend(_layer_entries(f"{prefix}.b{bi}.{lname}", layer))
            for lname, layer in cond.layers():
                out.extend(_layer_entries(f"{prefix}.b{bi}.{lname}", layer))
        out.extend(_layer_entries(f"{prefix}.fc", self.fc))
        return out


_LAYER_ATTRS = {
    "Conv2dLayer": ("kernel", "bias"),
    "LinearLayer": ("weight", "bias"),
    "BatchNormLayer": ("gamma", "beta", "running_mean", "running_var"),
}


def _layer_entries(prefix, layer):
    attrs = _LAYER_ATTRS[type(layer).__name__]
    return [(f"{prefix}.{a}", layer, a) for a in attrs]


class SeparationModel:
    """Both embedding nets plus the separation net, as one parameter set."""

    def __init__(self, cfg: ModelConfig, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        # One stream, three draws: the subnetworks stay weight-independent.
        self.embed_target = EmbeddingNet(cfg, rng, dtype)
        self.embed_interf = EmbeddingNet(cfg, rng, dtype)
        self.sep = SeparationNet(cfg, rng, dtype)

    def state_entries(self):
        return (self.embed_target.state_entries("embed_t")
                + self.embed_interf.state_entries("embed_i")
                + self.sep.state_entries("sep"))

    def params(self):
        out = []
        for _name, layer, attr in self.state_entries():
            v = getattr(layer, attr)
            if isinstance(v, Tensor) and v.requires_grad:
                out.append(v)
        return out

    def named_arrays(self):
        out = []
        for name, layer, attr in self.state_entries():
            v = getattr(layer, attr)
            out.append((name, v.data if isinstance(v, Tensor) else v))
        return out

    def set_mode(self, mode: str) -> None:
        if mode not in ("train", "infer"):
            raise ValueError(f"unknown mode {mode!r}")
        for _name, layer, attr in self.state_entries():
            if attr == "gamma":
                layer.mode = mode

    def astype(self, dtype) -> "SeparationModel":
        """Cast all state in place (float64 for gradient checking)."""
        self.dtype = dtype
        for _name, layer, attr in self.state_entries():
            v = getattr(layer, attr)
            if isinstance(v, Tensor):
                v.data = v.data.astype(dtype)
            else:
                setattr(layer, attr, v.astype(dtype))
        return self

    def save(self, path) -> None:
        save_checkpoint(path, self.named_arrays())
        self.cfg.save_json(f"{path}.json")

    @classmethod
    def load(cls, path, expected_cfg: ModelConfig | None = None,
             dtype=np.float32) -> "SeparationModel":
        try:
            cfg = ModelConfig.load_json(f"{path}.json")
        except FileNotFoundError as exc:
            raise BadCheckpoint(
                f"missing config sidecar {path}.json"
            ) from exc
        if expected_cfg is not None and cfg != expected_cfg:
            raise ConfigMismatch(
                "checkpoint config does not match the requested config"
            )
        model = cls(cfg, seed=0, dtype=dtype)
        tensors = load_checkpoint(path)
        entries = model.state_entries()
        names = {name for name, _l, _a in entries}
        missing = names - tensors.keys()
        extra = tensors.keys() - names
        if missing or extra:
            raise BadCheckpoint(
                f"checkpoint tensors do not match the model"
                f" (missing {sorted(missing)[:3]}, extra {sorted(extra)[:3]})"
            )
        for name, layer, attr in entries:
            arr = tensors[name]
            v = getattr(layer, attr)
            want = v.data.shape if isinstance(v, Tensor) else v.shape
            if tuple(arr.shape) != tuple(want):
                raise BadCheckpoint(
                    f"tensor {name} has shape {arr.shape}, expected {want}"
                )
            if isinstance(v, Tensor):
                v.data = arr.astype(dtype)
            else:
                setattr(layer, attr, arr.astype(dtype))
        return model
