"""Architecture hyperparameters and the stride arithmetic that follows
from them.

Defaults give the full-width network: a 4-block embedding stack ending in
512 channels and an 8-block separation stack. width_scale multiplies every
channel count (rounded up) so small models keep the same topology; the
final fully-connected layer shrinks with it.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from sepkit.errors import ConfigMismatch

# ((kh, kw), (stride_t, stride_f), channels) per residual block.
EMBED_BLOCKS = (
    ((8, 4), (3, 2), 64),
    ((8, 4), (3, 2), 128),
    ((4, 4), (1, 1), 256),
    ((4, 4), (1, 2), 512),
)
SEP_BLOCKS = (
    ((4, 4), (1, 1), 64),
    ((4, 4), (1, 1), 64),
    ((4, 4), (2, 2), 128),
    ((4, 4), (1, 1), 128),
    ((3, 3), (2, 2), 256),
    ((3, 3), (1, 1), 256),
    ((3, 3), (2, 2), 512),
    ((3, 3), (1, 1), 512),
)

_INJECTION_POINTS = ("post_conv", "post_bn")


def _as_block_tuple(blocks):
    return tuple(((int(k[0]), int(k[1])), (int(s[0]), int(s[1])), int(c))
                 for k, s, c in blocks)


@dataclass
class ModelConfig:
    embed_blocks: tuple = EMBED_BLOCKS
    sep_blocks: tuple = SEP_BLOCKS
    embed_dim: int = 512
    segment_frames: int = 100
    context_frames: int = 35
    n_freq: int = 201
    width_scale: float = 1.0
    injection_point: str = "post_bn"
    # Recorded feature/normalization choices, stored for provenance.
    feature_log_base: str = "e"
    bn_eps: float = 1e-5
    bn_momentum: float = 0.9

    def __post_init__(self):
        self.embed_blocks = _as_block_tuple(self.embed_blocks)
        self.sep_blocks = _as_block_tuple(self.sep_blocks)
        if not 0.0 < self.width_scale <= 1.0:
            raise ConfigMismatch("width_scale must be in (0, 1]")
        if self.injection_point not in _INJECTION_POINTS:
            raise ConfigMismatch(
                f"injection_point must be one of {_INJECTION_POINTS}"
            )
        if self.embed_dim != self.embed_blocks[-1][2]:
            raise ConfigMismatch(
                "embed_dim must equal the last embedding-block channel count"
            )
        if self.segment_frames < 1 or self.context_frames < 1 or self.n_freq < 1:
            raise ConfigMismatch("frame and frequency counts must be positive")

    def scaled(self, channels: int) -> int:
        return math.ceil(channels * self.width_scale)

    @property
    def effective_embed_dim(self) -> int:
        return self.scaled(self.embed_dim)

    @property
    def center_index(self) -> int:
        """0-based index of the central frame of a mixture segment."""
        return self.segment_frames // 2

    def embed_shapes(self):
        """(channels, t, f) after each embedding block on a context input."""
        return block_shapes(self.context_frames, self.n_freq,
                            self.embed_blocks, self.width_scale)

    def sep_shapes(self):
        """(channels, t, f) after each separation block on a segment input."""
        return block_shapes(self.segment_frames, self.n_freq,
                            self.sep_blocks, self.width_scale)

    @property
    def flatten_size(self) -> int:
        ch, t, f = self.sep_shapes()[-1]
        return ch * t * f

    def to_dict(self) -> dict:
        d = asdict(self)
        d["embed_blocks"] = [[list(k), list(s), c] for k, s, c in self.embed_blocks]
        d["sep_blocks"] = [[list(k), list(s), c] for k, s, c in self.sep_blocks]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        for key in ("embed_blocks", "sep_blocks"):
            if key in d:
                d[key] = _as_block_tuple(d[key])
        return cls(**d)

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load_json(cls, path) -> "ModelConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def block_shapes(t: int, f: int, blocks, width_scale: float = 1.0):
    """Spatial/channel ladder through a residual stack.

    Only the first convolution of a block strides; with same padding each
    axis maps size -> ceil(size/stride), so the per-block shape depends on
    strides alone.
    """
    shapes = []
    for _kernel, (st, sf), ch in blocks:
        t = -(-t // st)
        f = -(-f // sf)
        shapes.append((math.ceil(ch * width_scale), t, f))
    return shapes
