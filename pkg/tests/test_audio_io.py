import struct
import wave

import numpy as np
import pytest

from sepkit.audio_io import (CorpusManifest, Waveform, build_synth_corpus,
                             read_wav, synth_speaker, write_wav)
from sepkit.errors import NotWav, UnsupportedEncoding


def write_pcm16(path, values, rate=16000):
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(np.asarray(values, dtype="<i2").tobytes())


def test_read_wav_int16_scaling(tmp_path):
    p = tmp_path / "x.wav"
    write_pcm16(p, [0, 16384, -32768])
    wf = read_wav(p)
    assert wf.sample_rate == 16000
    assert np.array_equal(wf.samples, [0.0, 0.5, -1.0])


def test_write_read_round_trip(tmp_path, rng):
    x = rng.uniform(-1.0, 1.0, size=2048)
    p = tmp_path / "rt.wav"
    write_wav(p, Waveform(x, 16000))
    y = read_wav(p)
    assert y.sample_rate == 16000
    assert np.max(np.abs(y.samples - x)) <= 1.0 / 32768


def test_write_wav_clips(tmp_path):
    p = tmp_path / "clip.wav"
    write_wav(p, Waveform(np.array([2.0, 0.0, -2.0]), 16000))
    with wave.open(str(p), "rb") as fh:
        raw = np.frombuffer(fh.readframes(3), dtype="<i2")
    assert list(raw) == [32767, 0, -32768]


def test_read_wav_rejects_non_riff(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"this is not audio at all")
    with pytest.raises(NotWav):
        read_wav(p)


def test_read_wav_rejects_float_encoding(tmp_path):
    # Minimal IEEE-float WAV (format tag 3); wave cannot parse it.
    data = struct.pack("<4f", 0.0, 0.1, -0.1, 0.5)
    fmt = struct.pack("<HHIIHH", 3, 1, 16000, 64000, 4, 32)
    body = (b"WAVEfmt " + struct.pack("<I", len(fmt)) + fmt
            + b"data" + struct.pack("<I", len(data)) + data)
    p = tmp_path / "f32.wav"
    p.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    with pytest.raises(UnsupportedEncoding):
        read_wav(p)


def test_read_wav_rejects_stereo(tmp_path):
    p = tmp_path / "st.wav"
    with wave.open(str(p), "wb") as fh:
        fh.setnchannels(2)
        fh.setsampwidth(2)
        fh.setframerate(16000)
        fh.writeframes(np.zeros(8, dtype="<i2").tobytes())
    with pytest.raises(UnsupportedEncoding):
        read_wav(p)


def test_read_wav_rejects_8bit(tmp_path):
    p = tmp_path / "u8.wav"
    with wave.open(str(p), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(1)
        fh.setframerate(16000)
        fh.writeframes(bytes([128] * 16))
    with pytest.raises(UnsupportedEncoding):
        read_wav(p)


def test_waveform_rejects_2d():
    with pytest.raises(ValueError):
        Waveform(np.zeros((2, 3)), 16000)


def test_synth_deterministic():
    a = synth_speaker("harmonic", 1.0, 7, f0=220.0)
    b = synth_speaker("harmonic", 1.0, 7, f0=220.0)
    assert np.array_equal(a.samples, b.samples)


def test_synth_rms_normalized():
    for wf in (synth_speaker("harmonic", 1.0, 3, f0=220.0),
               synth_speaker("filtered_noise", 1.0, 4, band=(3000, 5000))):
        rms = np.sqrt(np.mean(wf.samples ** 2))
        assert abs(rms - 0.1) < 1e-6


def test_synth_kinds_have_disjoint_peaks():
    from sepkit import dsp
    harm = synth_speaker("harmonic", 1.0, 5, f0=220.0)
    noise = synth_speaker("filtered_noise", 1.0, 6, band=(3000, 5000))
    specs = []
    for wf in (harm, noise):
        spec, _ = dsp.stft(wf)
        specs.append(np.abs(spec.frames).mean(axis=0))
    top_h = set(np.argsort(specs[0])[-10:])
    top_n = set(np.argsort(specs[1])[-10:])
    assert not (top_h & top_n)
    # 201 bins span 0..8 kHz, so bin k sits at k*40 Hz.
    assert max(top_h) * 40 < 2000
    assert all(2800 <= b * 40 <= 5200 for b in top_n)


def test_synth_rejects_unknown_kind():
    with pytest.raises(ValueError):
        synth_speaker("whistle", 1.0, 0)


def test_corpus_build_and_manifest_round_trip(tmp_path):
    specs = [{"id": "a", "kind": "harmonic", "f0": 220.0},
             {"id": "b", "kind": "filtered_noise", "band": [3000.0, 5000.0]}]
    man = build_synth_corpus(tmp_path / "c1", specs, 2, 0.6, seed=9)
    loaded = CorpusManifest.load(tmp_path / "c1" / "manifest.json")
    assert loaded.speakers == man.speakers
    for _sid, paths in loaded.speakers:
        assert len(paths) == 2
        for p in paths:
            assert len(read_wav(p)) == 9600


def test_corpus_deterministic_audio(tmp_path):
    specs = [{"id": "a", "kind": "harmonic", "f0": 220.0},
             {"id": "b", "kind": "filtered_noise", "band": [3000.0, 5000.0]}]
    m1 = build_synth_corpus(tmp_path / "c1", specs, 2, 0.5, seed=11)
    m2 = build_synth_corpus(tmp_path / "c2", specs, 2, 0.5, seed=11)
    for (_, paths1), (_, paths2) in zip(m1.speakers, m2.speakers):
        for p1, p2 in zip(paths1, paths2):
            assert np.array_equal(read_wav(p1).samples, read_wav(p2).samples)


def test_manifest_rejects_duplicate_ids():
    with pytest.raises(ValueError):
        CorpusManifest([("a", ["x.wav"]), ("a", ["y.wav"])])
