from sepkit.model.blocks import (
    BlockConditioning,
    ResidualBlock,
    condition,
    residual_block_forward,
)
from sepkit.model.config import EMBED_BLOCKS, SEP_BLOCKS, ModelConfig, block_shapes
from sepkit.model.inference import (
    FramePair,
    embed_speaker,
    separate_frame,
    separate_utterance,
)
from sepkit.model.network import EmbeddingNet, SeparationModel, SeparationNet
from sepkit.model.training import batch_loss, stack_batch, training_step

__all__ = [
    "EMBED_BLOCKS",
    "SEP_BLOCKS",
    "BlockConditioning",
    "EmbeddingNet",
    "FramePair",
    "ModelConfig",
    "ResidualBlock",
    "SeparationModel",
    "SeparationNet",
    "batch_loss",
    "block_shapes",
    "condition",
    "embed_speaker",
    "residual_block_forward",
    "separate_frame",
    "separate_utterance",
    "stack_batch",
    "training_step",
]
