"""WAV file IO, corpus manifests, and deterministic synthetic speakers.

Only 16-bit PCM mono WAV is handled. read_wav accepts any sample rate
(rate checks belong to the pipeline entry points); everything synthesized
here is 16 kHz so the toolkit runs without an external dataset.
"""

from __future__ import annotations

import json
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import firwin

from sepkit.errors import NotWav, UnsupportedEncoding

PIPELINE_SAMPLE_RATE = 16000
SYNTH_RMS = 0.1
_NOISE_FIR_TAPS = 101


@dataclass
class Waveform:
    """Mono signal: float64 samples in [-1, 1] plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("waveform samples must be one-dimensional")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")

    def __len__(self):
        return self.samples.shape[0]


def read_wav(path) -> Waveform:
    """Read a PCM 16-bit mono WAV file, scaling samples by 1/32768."""
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(12)
    if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
        raise NotWav(f"{path} is not a RIFF/WAVE file")
    try:
        with wave.open(str(path), "rb") as wf:
            nchannels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        # The RIFF magic checked out, so the codec is what we cannot handle.
        raise UnsupportedEncoding(f"{path}: {exc}") from exc
    if nchannels != 1 or sampwidth != 2:
        raise UnsupportedEncoding(
            f"{path}: need 16-bit mono PCM, got {8 * sampwidth}-bit, {nchannels} channel(s)"
        )
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples, rate)


def write_wav(path, wf: Waveform) -> None:
    """Write a PCM 16-bit mono WAV file, clipping samples to [-1, 1]."""
    clipped = np.clip(wf.samples, -1.0, 1.0)
    ints = np.clip(np.rint(clipped * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as out:
        out.setnchannels(1)
        out.setsampwidth(2)
        out.setframerate(wf.sample_rate)
        out.writeframes(ints.tobytes())


def synth_speaker(kind, duration, seed, *, f0=None, band=None,
                  sample_rate=PIPELINE_SAMPLE_RATE) -> Waveform:
    """Synthesize a deterministic test "speaker" utterance.

    kind "harmonic" sums the first 5 harmonics of f0 with seeded random
    phases; kind "filtered_noise" band-limits seeded white noise with an
    FIR bandpass over band=(lo_hz, hi_hz). Output RMS is normalized to 0.1.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(seed)
    if kind == "harmonic":
        if f0 is None:
            raise ValueError("harmonic kind needs f0")
        t = np.arange(n) / sample_rate
        phases = rng.uniform(0.0, 2.0 * np.pi, size=5)
        x = np.zeros(n)
        for h in range(1, 6):
            x += np.sin(2.0 * np.pi * h * f0 * t + phases[h - 1])
    elif kind == "filtered_noise":
        if band is None:
            raise ValueError("filtered_noise kind needs band=(lo, hi)")
        lo, hi = band
        noise = rng.standard_normal(n)
        taps = firwin(_NOISE_FIR_TAPS, [lo, hi], pass_zero=False, fs=sample_rate)
        x = np.convolve(noise, taps, mode="same")
    else:
        raise ValueError(f"unknown speaker kind {kind!r}")
    rms = np.sqrt(np.mean(x * x))
    x *= SYNTH_RMS / rms
    return Waveform(x, sample_rate)


@dataclass
class CorpusManifest:
    """Speakers and their utterance WAV paths."""

    speakers: list[tuple[str, list[str]]] = field(default_factory=list)

    def __post_init__(self):
        ids = [sid for sid, _ in self.speakers]
        if len(set(ids)) != len(ids):
            raise ValueError("speaker ids must be unique")
        for sid, paths in self.speakers:
            if not paths:
                raise ValueError(f"speaker {sid!r} has no utterances")

    def __len__(self):
        return len(self.speakers)

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        with open(path) as fh:
            mapping = json.load(fh)
        return cls([(sid, list(paths)) for sid, paths in mapping.items()])

    def save(self, path) -> None:
        mapping = {sid: paths for sid, paths in self.speakers}
        with open(path, "w") as fh:
            json.dump(mapping, fh, indent=2)
            fh.write("\n")


def build_synth_corpus(out_dir, speaker_specs, utterances_per_speaker,
                       duration, seed) -> CorpusManifest:
    """Write a synthetic corpus of WAV files plus its manifest.json.

    speaker_specs is a list of dicts like {"id": "harm220", "kind": "harmonic",
    "f0": 220.0} or {"id": "noise3k", "kind": "filtered_noise", "band": [3000, 5000]}.
    Fully deterministic for a given (specs, seed).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    speakers = []
    for si, spec in enumerate(speaker_specs):
        sid = spec["id"]
        paths = []
        for ui in range(utterances_per_speaker):
            child = int(np.random.SeedSequence([seed, si, ui]).generate_state(1)[0])
            wf = synth_speaker(
                spec["kind"], duration, child,
                f0=spec.get("f0"), band=spec.get("band"),
            )
            path = out_dir / f"{sid}_{ui:03d}.wav"
            write_wav(path, wf)
            paths.append(str(path))
        speakers.append((sid, paths))
    manifest = CorpusManifest(speakers)
    manifest.save(out_dir / "manifest.json")
    return manifest
