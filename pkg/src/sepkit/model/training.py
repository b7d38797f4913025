"""One SGD step over a batch of training examples.

A batch item is (mixture_segment, target_context, interference_context,
label_frame), all log-magnitude arrays. The loss is the MSE between the
estimated target frame (mixture center + network output) and the label.
"""

from __future__ import annotations

import numpy as np

from sepkit.model.network import SeparationModel
from sepkit.nn import Tensor, mse_loss, sgd_step


def stack_batch(batch, dtype=np.float32):
    """Stack batch items into (seg, tctx, ictx, labels) arrays."""
    if not batch:
        raise ValueError("empty batch")
    seg = np.stack([np.asarray(b[0], dtype=dtype) for b in batch])[:, None]
    tctx = np.stack([np.asarray(b[1], dtype=dtype) for b in batch])[:, None]
    ictx = np.stack([np.asarray(b[2], dtype=dtype) for b in batch])[:, None]
    labels = np.stack([np.asarray(b[3], dtype=dtype) for b in batch])
    return seg, tctx, ictx, labels


def batch_loss(model: SeparationModel, seg, tctx, ictx, labels) -> Tensor:
    """Forward pass to the scalar MSE loss; grads flow if recording is on."""
    tgt = model.embed_target.forward(Tensor(tctx))
    itf = model.embed_interf.forward(Tensor(ictx))
    out = model.sep.forward(Tensor(seg), tgt, itf)
    center = Tensor(seg[:, 0, model.cfg.center_index, :])
    est_target = center + out
    return mse_loss(est_target, Tensor(labels))


def training_step(batch, model: SeparationModel, lr: float = 0.1) -> float:
    """Run forward/backward on one batch and apply SGD. Returns the
    pre-step loss value."""
    model.set_mode("train")
    seg, tctx, ictx, labels = stack_batch(batch, dtype=model.dtype)
    loss = batch_loss(model, seg, tctx, ictx, labels)
    loss.backward()
    sgd_step(model.params(), lr)
    return float(loss.data)
