"""Command-line entry point.

Subcommands cover the full pipeline: synthesizing a test corpus, mixing
at an exact SNR, training, separating an utterance with context audio,
scoring against references, and exporting spectrogram images. Every
command is deterministic given its flags; diagnostics go to stderr and
machine-readable output to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from sepkit import datagen, dsp, metrics
from sepkit.audio_io import build_synth_corpus, CorpusManifest, read_wav, write_wav
from sepkit.errors import SepkitError
from sepkit.model import ModelConfig, SeparationModel, separate_utterance, training_step

DEFAULT_SPEAKER_SPECS = (
    {"id": "harm220", "kind": "harmonic", "f0": 220.0},
    {"id": "noise3k5k", "kind": "filtered_noise", "band": [3000.0, 5000.0]},
)

_MODEL_KEYS = ("embed_blocks", "sep_blocks", "embed_dim", "segment_frames",
               "context_frames", "n_freq", "width_scale", "injection_point",
               "feature_log_base", "bn_eps", "bn_momentum")


@dataclass
class RunConfig:
    """Everything a training run depends on; written next to its outputs."""

    model: ModelConfig = field(default_factory=ModelConfig)
    lr: float = 0.1
    batch_size: int = 16
    steps: int = 1000
    seed: int = 0
    train_snrs: tuple = datagen.TRAIN_SNRS
    eval_snrs: tuple = datagen.EVAL_SNRS
    filter_len: int = metrics.DEFAULT_FILTER_LEN

    def to_dict(self) -> dict:
        d = asdict(self)
        del d["model"]
        d.update(self.model.to_dict())
        d["train_snrs"] = list(self.train_snrs)
        d["eval_snrs"] = list(self.eval_snrs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        model_part = {k: d.pop(k) for k in _MODEL_KEYS if k in d}
        if "train_snrs" in d:
            d["train_snrs"] = tuple(float(s) for s in d["train_snrs"])
        if "eval_snrs" in d:
            d["eval_snrs"] = tuple(float(s) for s in d["eval_snrs"])
        return cls(model=ModelConfig.from_dict(model_part), **d)


def cmd_mix(args) -> int:
    target = read_wav(args.target)
    interference = read_wav(args.interference)
    n = min(len(target), len(interference))
    target.samples = target.samples[:n]
    interference.samples = interference.samples[:n]
    mixture, gain = dsp.mix_at_snr(target, interference, args.snr)
    write_wav(args.out, mixture)
    print(f"{gain:.12g}")
    return 0


def cmd_train(args) -> int:
    if args.config:
        with open(args.config) as fh:
            run = RunConfig.from_dict(json.load(fh))
    else:
        run = RunConfig()
    if args.steps is not None:
        run.steps = args.steps
    if args.seed is not None:
        run.seed = args.seed
    if args.lr is not None:
        run.lr = args.lr
    if args.batch_size is not None:
        run.batch_size = args.batch_size

    manifest = CorpusManifest.load(args.corpus)
    model = SeparationModel(run.model, seed=run.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(f"{out}.run.json", "w") as fh:
        json.dump(run.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    loss_path = args.loss_log or f"{out}.loss.csv"
    stream = datagen.ExampleStream(
        manifest, run.seed,
        segment_frames=run.model.segment_frames,
        context_frames=run.model.context_frames,
        snrs=run.train_snrs)
    with open(loss_path, "w") as log, datagen.Prefetcher(stream) as pre:
        log.write("step,loss\n")
        for step in range(1, run.steps + 1):
            batch = [ex.as_batch_item() for ex in pre.take(run.batch_size)]
            loss = training_step(batch, model, run.lr)
            log.write(f"{step},{loss:.8g}\n")
            log.flush()
            if args.ckpt_every and step % args.ckpt_every == 0:
                model.save(out)
            if args.verbose and (step % 50 == 0 or step == 1):
                print(f"step {step} loss {loss:.6g}", file=sys.stderr)
    model.save(out)
    return 0


def cmd_separate(args) -> int:
    model = SeparationModel.load(args.ckpt)
    mixture = read_wav(args.mixture)
    tgt_ctx = read_wav(args.target_context)
    int_ctx = read_wav(args.interference_context)
    target, interference = separate_utterance(mixture, tgt_ctx, int_ctx, model)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_wav(out_dir / "target.wav", target)
    write_wav(out_dir / "interference.wav", interference)
    return 0


def cmd_evaluate(args) -> int:
    pairs = datagen.load_eval_set(args.manifest)
    model = None
    if args.oracle is None:
        if not args.ckpt:
            raise SepkitError("--ckpt is required unless --oracle is given")
        model = SeparationModel.load(args.ckpt)
    means, rows = metrics.evaluate_model(pairs, model,
                                         filter_len=args.filter_len,
                                         oracle=args.oracle)
    if args.out:
        metrics.write_eval_csv(args.out, rows, means)
    print(f"mean sdr {means['sdr']:.4f} sar {means['sar']:.4f}"
          f" sir {means['sir']:.4f}")
    return 0


def cmd_spectrogram(args) -> int:
    wf = read_wav(args.wav)
    spec, _phase = dsp.stft(wf)
    dsp.export_spectrogram_image(dsp.log_magnitude(spec), args.out)
    return 0


def cmd_synth_corpus(args) -> int:
    if args.speakers:
        with open(args.speakers) as fh:
            specs = json.load(fh)
    else:
        specs = [dict(s) for s in DEFAULT_SPEAKER_SPECS]
    manifest = build_synth_corpus(args.out_dir, specs, args.utterances,
                                  args.duration, args.seed)
    print(str(Path(args.out_dir) / "manifest.json"))
    return 0 if len(manifest) else 1


def cmd_make_eval(args) -> int:
    manifest = CorpusManifest.load(args.corpus)
    pairs = datagen.build_eval_set(manifest, args.seed)
    datagen.save_eval_set(args.out, pairs)
    print(f"{len(pairs)} pairs")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sepkit",
        description="speaker-conditioned single-channel source separation")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("mix", help="mix two WAVs at an exact SNR")
    q.add_argument("target")
    q.add_argument("interference")
    q.add_argument("--snr", type=float, required=True, help="SNR in dB")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_mix)

    q = sub.add_parser("train", help="train on a corpus manifest")
    q.add_argument("--corpus", required=True, help="corpus manifest JSON")
    q.add_argument("--config", help="run config JSON; defaults are full width")
    q.add_argument("--steps", type=int)
    q.add_argument("--seed", type=int)
    q.add_argument("--lr", type=float)
    q.add_argument("--batch-size", type=int)
    q.add_argument("--out", required=True, help="checkpoint path")
    q.add_argument("--loss-log", help="loss CSV path (default <out>.loss.csv)")
    q.add_argument("--ckpt-every", type=int, default=0)
    q.add_argument("--verbose", action="store_true")
    q.set_defaults(func=cmd_train)

    q = sub.add_parser("separate", help="separate a mixture with context audio")
    q.add_argument("--mixture", required=True)
    q.add_argument("--target-context", required=True)
    q.add_argument("--interference-context", required=True)
    q.add_argument("--ckpt", required=True)
    q.add_argument("--out-dir", required=True)
    q.set_defaults(func=cmd_separate)

    q = sub.add_parser("evaluate", help="score a model over an eval manifest")
    q.add_argument("--manifest", required=True, help="eval pairs JSON")
    q.add_argument("--ckpt")
    q.add_argument("--filter-len", type=int, default=metrics.DEFAULT_FILTER_LEN)
    q.add_argument("--out", help="CSV output path")
    q.add_argument("--oracle", choices=("target", "mixture"),
                   help="score a reference signal instead of the model")
    q.set_defaults(func=cmd_evaluate)

    q = sub.add_parser("spectrogram", help="export a log-magnitude PGM image")
    q.add_argument("--wav", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_spectrogram)

    q = sub.add_parser("synth-corpus", help="write a synthetic test corpus")
    q.add_argument("--out-dir", required=True)
    q.add_argument("--utterances", type=int, default=4, help="per speaker")
    q.add_argument("--duration", type=float, default=4.0, help="seconds")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--speakers", help="speaker spec JSON (default: 2 built-ins)")
    q.set_defaults(func=cmd_synth_corpus)

    q = sub.add_parser("make-eval", help="freeze an evaluation pairing")
    q.add_argument("--corpus", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_make_eval)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SepkitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
