"""STFT front end: analysis, log-magnitude features, synthesis, SNR mixing.

Frames are 400 samples (25 ms at 16 kHz) hopped by 160 (10 ms), windowed
with a periodic Hann and transformed by a real FFT of the same size, so a
spectrogram row holds 201 frequency bins. Synthesis is weighted overlap-add
with squared-window normalization, which reconstructs interior samples
exactly at this 60% overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sepkit.audio_io import PIPELINE_SAMPLE_RATE, Waveform
from sepkit.errors import ShapeMismatch, TooShort, WrongSampleRate, ZeroPower

WIN_LEN = 400
HOP = 160
N_FREQ = WIN_LEN // 2 + 1
LOG_FLOOR = 1e-5
_WSUM_EPS = 1e-10


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window, w[k] = 0.5*(1 - cos(2*pi*k/n))."""
    if n < 2:
        raise ValueError("window length must be >= 2")
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


@dataclass
class ComplexSpectrogram:
    """Complex STFT frames, one row per frame, 201 bins per row."""

    frames: np.ndarray
    win_len: int = WIN_LEN
    hop: int = HOP

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 2 or self.frames.shape[1] != self.win_len // 2 + 1:
            raise ShapeMismatch(
                f"expected (T, {self.win_len // 2 + 1}) frames, got {self.frames.shape}"
            )

    @property
    def num_frames(self):
        return self.frames.shape[0]


def num_frames(num_samples: int, win_len: int = WIN_LEN, hop: int = HOP) -> int:
    """Frame count for a waveform length; trailing partial frames are dropped."""
    if num_samples < win_len:
        return 0
    return (num_samples - win_len) // hop + 1


def stft(wf: Waveform) -> tuple[ComplexSpectrogram, np.ndarray]:
    """Analyze a waveform into (complex spectrogram, phase matrix).

    Frame t covers samples [t*160, t*160 + 400). Phase values lie in
    (-pi, pi].
    """
    if wf.sample_rate != PIPELINE_SAMPLE_RATE:
        raise WrongSampleRate(
            f"need {PIPELINE_SAMPLE_RATE} Hz input, got {wf.sample_rate}"
        )
    x = wf.samples
    if x.shape[0] < WIN_LEN:
        raise TooShort(f"need at least {WIN_LEN} samples, got {x.shape[0]}")
    frames = np.lib.stride_tricks.sliding_window_view(x, WIN_LEN)[::HOP]
    spec = np.fft.rfft(frames * hann_window(WIN_LEN), axis=1)
    phase = np.angle(spec)
    # np.angle can return -pi when the imaginary part is a negative zero;
    # fold it onto +pi so phase stays in (-pi, pi].
    phase[phase == -np.pi] = np.pi
    return ComplexSpectrogram(spec), phase


def log_magnitude(spec: ComplexSpectrogram) -> np.ndarray:
    """Natural-log magnitude with an additive floor: ln(|X| + 1e-5)."""
    return np.log(np.abs(spec.frames) + LOG_FLOOR)


def inv_log_magnitude(lm: np.ndarray) -> np.ndarray:
    """Invert log_magnitude; values below the floor clamp to 0 magnitude."""
    return np.maximum(np.exp(lm) - LOG_FLOOR, 0.0)


def istft(mag: np.ndarray, phase: np.ndarray, out_len: int) -> Waveform:
    """Weighted overlap-add synthesis from magnitude and phase matrices.

    Each frame is the inverse real FFT of mag*e^{i*phase}, multiplied by the
    analysis window and accumulated at the hop; the result is divided by the
    accumulated squared window (where it exceeds 1e-10, zero elsewhere) and
    cut or zero-padded to out_len samples.
    """
    mag = np.asarray(mag, dtype=np.float64)
    phase = np.asarray(phase, dtype=np.float64)
    if mag.shape != phase.shape:
        raise ShapeMismatch(f"mag {mag.shape} vs phase {phase.shape}")
    if mag.ndim != 2 or mag.shape[1] != N_FREQ:
        raise ShapeMismatch(f"expected (T, {N_FREQ}) matrices, got {mag.shape}")
    t_frames = mag.shape[0]
    window = hann_window(WIN_LEN)
    pieces = np.fft.irfft(mag * np.exp(1j * phase), n=WIN_LEN, axis=1) * window
    total = (t_frames - 1) * HOP + WIN_LEN if t_frames else 0
    acc = np.zeros(total)
    wsum = np.zeros(total)
    for t in range(t_frames):
        start = t * HOP
        acc[start:start + WIN_LEN] += pieces[t]
        wsum[start:start + WIN_LEN] += window * window
    out = np.where(wsum > _WSUM_EPS, acc / np.where(wsum > _WSUM_EPS, wsum, 1.0), 0.0)
    if out_len <= total:
        out = out[:out_len]
    else:
        out = np.concatenate([out, np.zeros(out_len - total)])
    return Waveform(out, PIPELINE_SAMPLE_RATE)


def mix_at_snr(target: Waveform, interference: Waveform,
               snr_db: float) -> tuple[Waveform, float]:
    """Mix interference into target at an exact SNR (in dB).

    The interference is scaled by g = sqrt(P_t / (P_i * 10^(snr/10))) where
    P is mean squared amplitude, so the measured SNR of the produced mixture
    components equals snr_db. Inputs must be equal length (truncate first).
    """
    if len(target) != len(interference):
        raise ShapeMismatch(
            f"length mismatch: target {len(target)}, interference {len(interference)}"
        )
    if target.sample_rate != interference.sample_rate:
        raise WrongSampleRate("target and interference sample rates differ")
    p_t = np.mean(target.samples ** 2)
    p_i = np.mean(interference.samples ** 2)
    if p_t == 0.0 or p_i == 0.0:
        raise ZeroPower("cannot set an SNR against a zero-power signal")
    gain = float(np.sqrt(p_t / (p_i * 10.0 ** (snr_db / 10.0))))
    mixture = Waveform(target.samples + gain * interference.samples,
                       target.sample_rate)
    return mixture, gain


def export_spectrogram_image(lm: np.ndarray, path) -> None:
    """Write a log-magnitude matrix as a grayscale PGM (P5) image.

    Width is the frame count, height 201, with frequency bin 200 on the top
    row. Values are min-max normalized per image to 0..255; a constant input
    maps to all zeros.
    """
    lm = np.asarray(lm, dtype=np.float64)
    if lm.ndim != 2 or lm.shape[1] != N_FREQ:
        raise ShapeMismatch(f"expected (T, {N_FREQ}) input, got {lm.shape}")
    img = lm.T[::-1]
    lo, hi = img.min(), img.max()
    if hi > lo:
        pixels = np.rint((img - lo) / (hi - lo) * 255.0)
    else:
        pixels = np.zeros_like(img)
    pixels = pixels.astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5 {lm.shape[0]} {N_FREQ} 255\n".encode("ascii"))
        fh.write(pixels.tobytes())
