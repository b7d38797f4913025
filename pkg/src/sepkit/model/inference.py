"""Frame-level estimation and full-utterance separation.

The network predicts one frame per 100-frame mixture window. A whole
utterance is separated by replicating edge frames so a window can be
centered on every original frame, then sliding the window one frame at a
time. Batch norm runs in infer mode and no graph is recorded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sepkit import dsp
from sepkit.audio_io import Waveform
from sepkit.errors import TooShort
from sepkit.model.network import SeparationModel
from sepkit.nn import Tensor, no_grad

# Windows per forward pass when sweeping an utterance; bounds peak memory.
_WINDOW_BATCH = 32


@dataclass
class FramePair:
    """One estimated log-magnitude frame per source."""

    est_target: np.ndarray
    est_interference: np.ndarray


def embed_speaker(context: np.ndarray, net, dtype=np.float32) -> np.ndarray:
    """Embed one (context_frames, 201) log-magnitude context."""
    ctx = Tensor(np.asarray(context, dtype=dtype)[None, None])
    with no_grad():
        emb = net.forward(ctx)
    return emb.data[0]


def separate_frame(mixture_segment: np.ndarray, tgt_emb: np.ndarray,
                   itf_emb: np.ndarray, model: SeparationModel) -> FramePair:
    """Estimate the central target frame of one mixture segment.

    est_target = center + fc_out; est_interference is derived from it as
    center - est_target, so the pair always sums to twice the center.
    """
    model.set_mode("infer")
    center = np.asarray(mixture_segment)[model.cfg.center_index].copy()
    seg = Tensor(np.asarray(mixture_segment, dtype=model.dtype)[None, None])
    tgt = Tensor(np.asarray(tgt_emb, dtype=model.dtype)[None])
    itf = Tensor(np.asarray(itf_emb, dtype=model.dtype)[None])
    with no_grad():
        out = model.sep.forward(seg, tgt, itf)
    est_target = center + out.data[0].astype(center.dtype)
    est_interference = center - est_target
    return FramePair(est_target, est_interference)


def _context_logmag(wf: Waveform, frames_needed: int, what: str) -> np.ndarray:
    spec, _phase = dsp.stft(wf)
    lm = dsp.log_magnitude(spec)
    if lm.shape[0] < frames_needed:
        raise TooShort(
            f"{what} has {lm.shape[0]} frames, need {frames_needed};"
            f" supply at least {(frames_needed - 1) * dsp.HOP + dsp.WIN_LEN} samples"
        )
    return lm[:frames_needed]


def separate_utterance(mixture: Waveform, tgt_ctx_wav: Waveform,
                       int_ctx_wav: Waveform, model: SeparationModel,
                       ) -> tuple[Waveform, Waveform]:
    """Separate a full mixture given context audio for both speakers.

    Embeddings are computed once from the first context_frames frames of
    each context waveform. Output waveforms match the mixture length; the
    mixture phase is reused for both reconstructions.
    """
    cfg = model.cfg
    model.set_mode("infer")
    spec, phase = dsp.stft(mixture)
    lm = dsp.log_magnitude(spec)
    t_frames = lm.shape[0]

    tgt_emb = embed_speaker(
        _context_logmag(tgt_ctx_wav, cfg.context_frames, "target context"),
        model.embed_target, model.dtype)
    itf_emb = embed_speaker(
        _context_logmag(int_ctx_wav, cfg.context_frames, "interference context"),
        model.embed_interf, model.dtype)

    s = cfg.segment_frames
    left = cfg.center_index
    right = s - 1 - left
    padded = np.pad(lm, ((left, right), (0, 0)), mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (s, lm.shape[1]))
    windows = windows[:, 0]  # (t_frames, s, n_freq)

    fc_out = np.empty((t_frames, cfg.n_freq), dtype=np.float64)
    with no_grad():
        for start in range(0, t_frames, _WINDOW_BATCH):
            chunk = windows[start:start + _WINDOW_BATCH]
            n = chunk.shape[0]
            seg = Tensor(chunk[:, None].astype(model.dtype))
            tgt = Tensor(np.broadcast_to(tgt_emb, (n, tgt_emb.shape[0])).copy())
            itf = Tensor(np.broadcast_to(itf_emb, (n, itf_emb.shape[0])).copy())
            fc_out[start:start + n] = model.sep.forward(seg, tgt, itf).data

    est_target_lm = lm + fc_out
    est_interf_lm = lm - est_target_lm
    target = dsp.istft(dsp.inv_log_magnitude(est_target_lm), phase, len(mixture))
    interference = dsp.istft(dsp.inv_log_magnitude(est_interf_lm), phase,
                             len(mixture))
    return target, interference
