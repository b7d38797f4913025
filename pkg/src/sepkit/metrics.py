"""SDR/SIR/SAR via the least-squares source decomposition.

An estimate is split into s_target (its projection onto delayed copies of
the true source), e_interf (the extra part explained by delayed copies of
both sources), and e_artif (the remainder). Projections are solved through
FFT-based normal equations; components live at the padded length n+L-1 so
no correlation terms are truncated. A dense design-matrix solve of the
same problem is kept alongside as the verification oracle.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import fftconvolve

from sepkit.errors import ShapeMismatch, SingularGram

DAMPING = 1e-10
DB_CAP = 200.0
DEFAULT_FILTER_LEN = 512


@dataclass
class BssEvalResult:
    sdr: float
    sar: float
    sir: float
    filter_len: int


def worker_count(n_items=None) -> int:
    """Worker threads to use; SEPKIT_THREADS bounds it."""
    n = os.cpu_count() or 1
    env = os.environ.get("SEPKIT_THREADS")
    if env:
        n = max(1, min(n, int(env)))
    if n_items is not None:
        n = max(1, min(n, n_items))
    return n


def _as_samples(wf) -> np.ndarray:
    return np.asarray(wf.samples if hasattr(wf, "samples") else wf,
                      dtype=np.float64)


def _project(refs: np.ndarray, est: np.ndarray, flen: int) -> np.ndarray:
    """Least-squares projection of est onto delays 0..flen-1 of each ref.

    Returns the projection at length n + flen - 1. The Gram matrix gets an
    absolute Tikhonov damping of 1e-10 on its diagonal before the solve.
    """
    nsrc, n = refs.shape
    nfft = 1 << int(np.ceil(np.log2(n + flen - 1)))
    sf = np.fft.rfft(refs, n=nfft, axis=1)
    sef = np.fft.rfft(est, n=nfft)

    gram = np.zeros((nsrc * flen, nsrc * flen))
    for i in range(nsrc):
        for j in range(i, nsrc):
            ssf = np.fft.irfft(sf[i] * np.conj(sf[j]), n=nfft)
            block = toeplitz(np.hstack((ssf[0], ssf[-1:-flen:-1])), ssf[:flen])
            gram[i * flen:(i + 1) * flen, j * flen:(j + 1) * flen] = block
            if i != j:
                gram[j * flen:(j + 1) * flen, i * flen:(i + 1) * flen] = block.T

    rhs = np.zeros(nsrc * flen)
    for i in range(nsrc):
        ssef = np.fft.irfft(sf[i] * np.conj(sef), n=nfft)
        rhs[i * flen:(i + 1) * flen] = np.hstack((ssef[0], ssef[-1:-flen:-1]))

    gram[np.diag_indices_from(gram)] += DAMPING
    try:
        coef = np.linalg.solve(gram, rhs).reshape(nsrc, flen)
    except np.linalg.LinAlgError as exc:
        raise SingularGram("normal equations singular despite damping") from exc

    proj = np.zeros(n + flen - 1)
    for i in range(nsrc):
        proj += fftconvolve(coef[i], refs[i])[:n + flen - 1]
    return proj


def bss_decompose(estimate, references, filter_len: int = DEFAULT_FILTER_LEN):
    """Split estimate into (s_target, e_interf, e_artif) numpy arrays.

    references[0] is the true source. All three components come back at
    the padded length n + filter_len - 1.
    """
    est = _as_samples(estimate)
    refs = np.stack([_as_samples(r) for r in references])
    if refs.shape[1] != est.shape[0]:
        raise ShapeMismatch(
            f"estimate length {est.shape[0]} vs references {refs.shape[1]}"
        )
    if filter_len < 1:
        raise ValueError("filter_len must be >= 1")
    s_target = _project(refs[:1], est, filter_len)
    p_all = _project(refs, est, filter_len)
    e_interf = p_all - s_target
    e_artif = np.concatenate([est, np.zeros(filter_len - 1)]) - p_all
    return s_target, e_interf, e_artif


def _ratio_db(num: float, den: float) -> float:
    if den == 0.0:
        return DB_CAP
    return min(10.0 * np.log10(num / den), DB_CAP)


def bss_eval(estimate, references,
             filter_len: int = DEFAULT_FILTER_LEN) -> BssEvalResult:
    s_target, e_interf, e_artif = bss_decompose(estimate, references, filter_len)
    s2 = float(np.sum(s_target ** 2))
    i2 = float(np.sum(e_interf ** 2))
    a2 = float(np.sum(e_artif ** 2))
    sdr = _ratio_db(s2, float(np.sum((e_interf + e_artif) ** 2)))
    sir = _ratio_db(s2, i2)
    sar = _ratio_db(float(np.sum((s_target + e_interf) ** 2)), a2)
    return BssEvalResult(sdr=sdr, sar=sar, sir=sir, filter_len=filter_len)


def evaluate_model(pairs, model, filter_len: int = DEFAULT_FILTER_LEN,
                   oracle: str | None = None):
    """Separate and score every EvalPair; returns (means, rows).

    Each pair is mixed at its stored SNR; context audio is the beginning
    of each clean utterance. oracle="target" scores the true target as
    the estimate (upper bound), oracle="mixture" scores the unprocessed
    mixture (lower baseline). rows is one dict per pair in input order.
    """
    from sepkit import dsp
    from sepkit.audio_io import Waveform, read_wav
    from sepkit.model.inference import separate_utterance

    def score(item):
        idx, pair = item
        tgt = read_wav(pair.target_path)
        itf = read_wav(pair.interference_path)
        n = min(len(tgt), len(itf))
        target = Waveform(tgt.samples[:n], tgt.sample_rate)
        interf = Waveform(itf.samples[:n], itf.sample_rate)
        mixture, gain = dsp.mix_at_snr(target, interf, pair.snr_db)
        if oracle == "target":
            est = target
        elif oracle == "mixture":
            est = mixture
        else:
            est, _ = separate_utterance(mixture, tgt, itf, model)
        refs = [target, Waveform(gain * interf.samples, interf.sample_rate)]
        r = bss_eval(est, refs, filter_len)
        return {"pair_id": idx, "snr_db": pair.snr_db,
                "sdr": r.sdr, "sar": r.sar, "sir": r.sir}

    items = list(enumerate(pairs))
    if not items:
        raise ValueError("empty evaluation set")
    with ThreadPoolExecutor(max_workers=worker_count(len(items))) as pool:
        rows = list(pool.map(score, items))
    means = {key: float(np.mean([r[key] for r in rows]))
             for key in ("sdr", "sar", "sir")}
    return means, rows


def write_eval_csv(path, rows, means) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair_id", "snr_db", "sdr", "sar", "sir"])
        for r in rows:
            writer.writerow([r["pair_id"], r["snr_db"],
                             f"{r['sdr']:.6f}", f"{r['sar']:.6f}", f"{r['sir']:.6f}"])
        writer.writerow(["mean", "",
                         f"{means['sdr']:.6f}", f"{means['sar']:.6f}",
                         f"{means['sir']:.6f}"])
