"""Training-example sampling and frozen evaluation sets.

A training example mixes two random utterances from distinct speakers at
a random SNR, cuts a segment from the mixture log-magnitude, cuts clean
context windows from regions of each source utterance disjoint from the
segment, and takes the target's central segment frame as the label.
Everything is a pure function of (manifest, seed), so example k of a run
is reproducible in isolation; the prefetcher exploits exactly that.
"""

from __future__ import annotations

import itertools
import json
import queue
import threading
from dataclasses import asdict, dataclass

import numpy as np

from sepkit import dsp
from sepkit.audio_io import CorpusManifest, Waveform, read_wav
from sepkit.errors import NotEnoughSpeakers, TooShortUtterance

TRAIN_SNRS = (-5.0, 0.0, 5.0, 10.0, 15.0, 25.0)
EVAL_SNRS = (-5.0, -3.0, -1.0, 0.0, 1.0, 3.0, 5.0)
_MAX_ATTEMPTS = 100


@dataclass
class ExampleMeta:
    target_id: str
    interference_id: str
    target_path: str
    interference_path: str
    snr_db: float
    gain: float
    trunc_len: int
    seg_start: int
    tgt_ctx_start: int
    int_ctx_start: int
    seed: int | list


@dataclass
class TrainingExample:
    mixture_segment: np.ndarray
    target_context: np.ndarray
    interference_context: np.ndarray
    label_frame: np.ndarray
    meta: ExampleMeta

    def as_batch_item(self):
        return (self.mixture_segment, self.target_context,
                self.interference_context, self.label_frame)


@dataclass
class EvalPair:
    target_id: str
    target_path: str
    interference_id: str
    interference_path: str
    snr_db: float
    seed: int


def _context_starts(t_frames, context_frames, seg_start, segment_frames):
    """Window starts whose frames avoid [seg_start, seg_start+segment)."""
    starts = np.arange(t_frames - context_frames + 1)
    ok = (starts + context_frames <= seg_start) | (starts >= seg_start + segment_frames)
    return starts[ok]


def sample_training_example(manifest: CorpusManifest, rng_seed,
                            segment_frames: int = 100,
                            context_frames: int = 35,
                            snrs=TRAIN_SNRS,
                            loader=read_wav) -> TrainingExample:
    """Draw one example, fully determined by (manifest, rng_seed).

    Draws that land on utterances too short for the segment plus a
    disjoint context are rejected and redrawn, up to 100 attempts.
    """
    if len(manifest) < 2:
        raise NotEnoughSpeakers("training needs at least 2 speakers")
    rng = np.random.default_rng(rng_seed)
    speakers = manifest.speakers
    for _attempt in range(_MAX_ATTEMPTS):
        si_t, si_i = rng.choice(len(speakers), size=2, replace=False)
        tgt_id, tgt_paths = speakers[si_t]
        itf_id, itf_paths = speakers[si_i]
        tgt_path = tgt_paths[int(rng.integers(len(tgt_paths)))]
        itf_path = itf_paths[int(rng.integers(len(itf_paths)))]
        snr_db = snrs[int(rng.integers(len(snrs)))]
        seg_start_u = rng.random()
        ctx_u = rng.random(2)

        tgt_wf = loader(tgt_path)
        itf_wf = loader(itf_path)
        n = min(len(tgt_wf), len(itf_wf))
        t_frames = dsp.num_frames(n)
        if t_frames < segment_frames:
            continue
        seg_start = int(seg_start_u * (t_frames - segment_frames + 1))
        starts = _context_starts(t_frames, context_frames, seg_start,
                                 segment_frames)
        if starts.size == 0:
            continue
        tgt_ctx_start = int(starts[int(ctx_u[0] * starts.size)])
        int_ctx_start = int(starts[int(ctx_u[1] * starts.size)])

        target = Waveform(tgt_wf.samples[:n], tgt_wf.sample_rate)
        interf = Waveform(itf_wf.samples[:n], itf_wf.sample_rate)
        mixture, gain = dsp.mix_at_snr(target, interf, snr_db)

        mix_lm = dsp.log_magnitude(dsp.stft(mixture)[0])
        tgt_lm = dsp.log_magnitude(dsp.stft(target)[0])
        itf_lm = dsp.log_magnitude(dsp.stft(interf)[0])

        meta = ExampleMeta(tgt_id, itf_id, str(tgt_path), str(itf_path),
                           float(snr_db), gain, n, seg_start,
                           tgt_ctx_start, int_ctx_start, _seed_value(rng_seed))
        return TrainingExample(
            mixture_segment=mix_lm[seg_start:seg_start + segment_frames],
            target_context=tgt_lm[tgt_ctx_start:tgt_ctx_start + context_frames],
            interference_context=itf_lm[int_ctx_start:int_ctx_start + context_frames],
            label_frame=tgt_lm[seg_start + segment_frames // 2],
            meta=meta,
        )
    raise TooShortUtterance(
        f"no utterance pair admits a {segment_frames}-frame segment plus a"
        f" disjoint {context_frames}-frame context after {_MAX_ATTEMPTS} draws"
    )


def _seed_value(rng_seed):
    # Keep the seed JSON-friendly: sequences become lists of ints.
    if isinstance(rng_seed, (list, tuple)):
        return [int(s) for s in rng_seed]
    return int(rng_seed)


class ExampleStream:
    """Indexed view of the sampling distribution: item k uses seed
    [base_seed, k], so any slice of the stream can be regenerated."""

    def __init__(self, manifest, base_seed, segment_frames=100,
                 context_frames=35, snrs=TRAIN_SNRS):
        self.manifest = manifest
        self.base_seed = int(base_seed)
        self.segment_frames = segment_frames
        self.context_frames = context_frames
        self.snrs = tuple(snrs)
        self._cache = {}

    def _load(self, path):
        if path not in self._cache:
            self._cache[path] = read_wav(path)
        return self._cache[path]

    def example(self, k: int) -> TrainingExample:
        return sample_training_example(
            self.manifest, [self.base_seed, int(k)],
            self.segment_frames, self.context_frames, snrs=self.snrs,
            loader=self._load)


class Prefetcher:
    """Single producer thread keeping a bounded queue of examples.

    Results are in stream order regardless of timing, because item k is
    generated from its own seed; the thread only hides IO/STFT latency.
    """

    def __init__(self, stream: ExampleStream, depth: int = 64, start: int = 0):
        self._stream = stream
        self._q = queue.Queue(maxsize=depth)
        self._stop = threading.Event()
        self._thread = threading.Thread(
            target=self._produce, args=(start,), daemon=True)
        self._thread.start()

    def _produce(self, start):
        for k in itertools.count(start):
            item = self._stream.example(k)
            while not self._stop.is_set():
                try:
                    self._q.put(item, timeout=0.1)
                    break
                except queue.Full:
                    continue
            if self._stop.is_set():
                return

    def take(self, n: int) -> list:
        return [self._q.get() for _ in range(n)]

    def close(self):
        self._stop.set()
        # Unblock a producer stuck on a full queue.
        try:
            while True:
                self._q.get_nowait()
        except queue.Empty:
            pass
        self._thread.join(timeout=5.0)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def build_eval_set(manifest: CorpusManifest, seed: int) -> list[EvalPair]:
    """Pair up utterances across speakers, deterministically from seed.

    Utterances are matched by repeatedly drawing from the two speakers
    with the most remaining, which maximizes the number of cross-speaker
    pairs; roles within a pair are randomized and SNRs cycle through the
    7-value evaluation set in order. Context audio for an EvalPair is
    taken from the beginning of each utterance at separation time.
    """
    if len(manifest) < 2:
        raise NotEnoughSpeakers("evaluation needs at least 2 speakers")
    rng = np.random.default_rng(seed)
    pools = []
    for sid, paths in manifest.speakers:
        pool = list(paths)
        rng.shuffle(pool)
        pools.append((sid, pool))
    pairs = []
    while True:
        avail = sorted((p for p in pools if p[1]),
                       key=lambda p: (-len(p[1]), p[0]))
        if len(avail) < 2:
            break
        (sid_a, pool_a), (sid_b, pool_b) = avail[0], avail[1]
        ua, ub = pool_a.pop(), pool_b.pop()
        if int(rng.integers(2)):
            (tgt_id, tgt_path), (itf_id, itf_path) = (sid_a, ua), (sid_b, ub)
        else:
            (tgt_id, tgt_path), (itf_id, itf_path) = (sid_b, ub), (sid_a, ua)
        snr = EVAL_SNRS[len(pairs) % len(EVAL_SNRS)]
        pairs.append(EvalPair(tgt_id, str(tgt_path), itf_id, str(itf_path),
                              snr, int(seed)))
    return pairs


def save_eval_set(path, pairs) -> None:
    with open(path, "w") as fh:
        json.dump([asdict(p) for p in pairs], fh, indent=2)
        fh.write("\n")


def load_eval_set(path) -> list[EvalPair]:
    with open(path) as fh:
        return [EvalPair(**d) for d in json.load(fh)]
