import numpy as np
import pytest

from sepkit import dsp
from sepkit.audio_io import Waveform
from sepkit.errors import (ShapeMismatch, TooShort, WrongSampleRate,
                           ZeroPower)


def dft_frame_oracle(x, start, k):
    """Windowed DFT bin k of the 400-sample frame at `start` by direct
    summation. Independent of the fft-based implementation."""
    w = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(400) / 400.0))
    seg = x[start:start + 400]
    n = np.arange(400)
    return np.sum(seg * w * np.exp(-2j * np.pi * k * n / 400.0))


def test_hann_window_closed_forms():
    assert np.allclose(dsp.hann_window(4), [0.0, 0.5, 1.0, 0.5])
    assert np.allclose(dsp.hann_window(2), [0.0, 1.0])
    assert dsp.hann_window(400).sum() == pytest.approx(200.0, abs=1e-12)


def test_num_frames_formula():
    assert dsp.num_frames(400) == 1
    assert dsp.num_frames(560) == 2
    assert dsp.num_frames(16000) == 98


def test_stft_zero_input():
    wf = Waveform(np.zeros(560), 16000)
    spec, phase = dsp.stft(wf)
    assert spec.frames.shape == (2, 201)
    assert np.all(np.abs(spec.frames) == 0.0)
    assert phase.shape == (2, 201)


def test_stft_matches_dft_oracle(rng):
    x = rng.standard_normal(900)
    spec, _ = dsp.stft(Waveform(x, 16000))
    assert spec.frames.shape == (4, 201)
    for t in (0, 3):
        for k in (0, 57, 200):
            want = dft_frame_oracle(x, t * 160, k)
            assert spec.frames[t, k] == pytest.approx(want, abs=1e-9)


def test_stft_bin_cosine_magnitude():
    # Cosine at an exact bin frequency concentrates in that bin; the
    # windowed magnitude equals amplitude * sum(w)/2 = 100 there.
    k = 25
    n = np.arange(400)
    x = np.cos(2.0 * np.pi * k * n / 400.0)
    spec, _ = dsp.stft(Waveform(x, 16000))
    want = abs(dft_frame_oracle(x, 0, k))
    assert want == pytest.approx(100.0, abs=1e-9)
    assert abs(spec.frames[0, k]) == pytest.approx(want, abs=1e-9)


def test_stft_phase_range(rng):
    x = rng.standard_normal(2000)
    _, phase = dsp.stft(Waveform(x, 16000))
    assert np.all(phase > -np.pi)
    assert np.all(phase <= np.pi)


def test_stft_rejects_wrong_rate():
    with pytest.raises(WrongSampleRate):
        dsp.stft(Waveform(np.zeros(800), 8000))


def test_stft_rejects_short_input():
    with pytest.raises(TooShort):
        dsp.stft(Waveform(np.zeros(399), 16000))


def test_log_magnitude_floor_and_monotonicity():
    spec = dsp.ComplexSpectrogram(np.zeros((1, 201), dtype=complex))
    lm = dsp.log_magnitude(spec)
    assert np.allclose(lm, np.log(1e-5))
    frames = np.zeros((1, 201), dtype=complex)
    frames[0, 3] = 1.0 - 1e-5
    frames[0, 4] = 2.0
    lm = dsp.log_magnitude(dsp.ComplexSpectrogram(frames))
    assert lm[0, 3] == pytest.approx(0.0, abs=1e-12)
    assert lm[0, 4] > lm[0, 3] > lm[0, 5]


def test_inv_log_magnitude():
    assert dsp.inv_log_magnitude(np.array([np.log(1e-5)])) == pytest.approx(0.0)
    assert dsp.inv_log_magnitude(np.array([-30.0]))[0] == 0.0
    mags = np.abs(np.random.default_rng(1).standard_normal((3, 201))) + 0.01
    spec = dsp.ComplexSpectrogram(mags.astype(complex))
    back = dsp.inv_log_magnitude(dsp.log_magnitude(spec))
    assert np.max(np.abs(back - mags) / mags) < 1e-9


def test_istft_round_trip(rng):
    x = rng.standard_normal(16000)
    spec, phase = dsp.stft(Waveform(x, 16000))
    y = dsp.istft(np.abs(spec.frames), phase, 16000)
    assert len(y) == 16000
    core = slice(400, 16000 - 400)
    err = np.linalg.norm(y.samples[core] - x[core]) / np.linalg.norm(x[core])
    assert err < 1e-6


def test_istft_zero_and_linearity(rng):
    mag = np.abs(rng.standard_normal((5, 201)))
    phase = rng.uniform(-3.0, 3.0, size=(5, 201))
    zero = dsp.istft(np.zeros((5, 201)), phase, 1200)
    assert np.all(zero.samples == 0.0)
    y1 = dsp.istft(mag, phase, 1200)
    y3 = dsp.istft(3.0 * mag, phase, 1200)
    assert np.allclose(y3.samples, 3.0 * y1.samples, atol=1e-12)


def test_istft_pads_to_out_len():
    y = dsp.istft(np.zeros((2, 201)), np.zeros((2, 201)), 2000)
    assert len(y) == 2000


def test_istft_shape_checks():
    with pytest.raises(ShapeMismatch):
        dsp.istft(np.zeros((2, 201)), np.zeros((3, 201)), 100)
    with pytest.raises(ShapeMismatch):
        dsp.istft(np.zeros((2, 200)), np.zeros((2, 200)), 100)


def test_mix_at_snr_gains(rng):
    x = rng.standard_normal(4000)
    t = Waveform(x, 16000)
    i = Waveform(rng.permutation(x), 16000)
    _, g0 = dsp.mix_at_snr(t, i, 0.0)
    assert g0 == pytest.approx(1.0, abs=1e-12)
    _, g10 = dsp.mix_at_snr(t, i, 10.0)
    assert g10 == pytest.approx(10.0 ** -0.5, abs=1e-12)


def test_mix_at_snr_exactness(rng):
    t = Waveform(rng.standard_normal(4000), 16000)
    i = Waveform(rng.standard_normal(4000) * 0.3, 16000)
    for snr in (-5, -3, -1, 0, 1, 3, 5, 10, 15, 25):
        _, gain = dsp.mix_at_snr(t, i, snr)
        measured = 10.0 * np.log10(np.mean(t.samples ** 2)
                                   / np.mean((gain * i.samples) ** 2))
        assert abs(measured - snr) < 1e-9


def test_mix_at_snr_errors(rng):
    t = Waveform(rng.standard_normal(100), 16000)
    with pytest.raises(ShapeMismatch):
        dsp.mix_at_snr(t, Waveform(np.ones(99), 16000), 0.0)
    with pytest.raises(WrongSampleRate):
        dsp.mix_at_snr(t, Waveform(np.ones(100), 8000), 0.0)
    with pytest.raises(ZeroPower):
        dsp.mix_at_snr(t, Waveform(np.zeros(100), 16000), 0.0)


def test_export_spectrogram_image(tmp_path, rng):
    lm = rng.standard_normal((7, 201))
    p = tmp_path / "spec.pgm"
    dsp.export_spectrogram_image(lm, p)
    raw = p.read_bytes()
    assert raw.startswith(b"P5 7 201 255\n")
    pixels = np.frombuffer(raw.split(b"\n", 1)[1], dtype=np.uint8)
    assert pixels.size == 7 * 201
    assert pixels.max() == 255
    # one maximal cell maps to 255, in the top-origin flipped layout
    hot = np.zeros((2, 201))
    hot[1, 5] = 1.0
    p2 = tmp_path / "hot.pgm"
    dsp.export_spectrogram_image(hot, p2)
    img = np.frombuffer(p2.read_bytes().split(b"\n", 1)[1],
                        dtype=np.uint8).reshape(201, 2)
    assert img[200 - 5, 1] == 255
    assert img.sum() == 255


def test_export_spectrogram_constant_is_black(tmp_path):
    p = tmp_path / "flat.pgm"
    dsp.export_spectrogram_image(np.full((3, 201), 2.5), p)
    pixels = np.frombuffer(p.read_bytes().split(b"\n", 1)[1], dtype=np.uint8)
    assert np.all(pixels == 0)
