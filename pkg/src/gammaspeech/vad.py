"""Energy-based voice activity detection with a two-component GMM.

Per-frame log-energies are clustered by EM; frames assigned to the
higher-mean component count as speech. The mask fails open (everything is
speech) when the two fitted means are too close to trust the split, since
losing silence removal is safer than deleting speech.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .dsp import frame_signal, frame_sizes

VARIANCE_FLOOR = 1e-6
ENERGY_EPS = 1e-10
FAIL_OPEN_SEPARATION = 1.0


@dataclass(frozen=True)
class VadConfig:
    frame_ms: float = 25.0
    overlap_ms: float = 10.0
    hangover_frames: int = 2
    min_run_frames: int = 3
    iters: int = 20
    seed: int = 0


@dataclass
class Gmm1d:
    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    log_likelihoods: list[float]

    @property
    def k(self) -> int:
        return len(self.means)


@dataclass
class VadMask:
    speech: np.ndarray          # T booleans
    hangover_frames: int
    min_run_frames: int
    frame_ms: float
    overlap_ms: float


def _log_pdf(x: np.ndarray, means, variances, weights) -> np.ndarray:
    # component log densities, shape (len(x), k)
    var = variances[None, :]
    d = x[:, None] - means[None, :]
    return (np.log(weights[None, :]) - 0.5 * np.log(2.0 * np.pi * var)
            - 0.5 * d * d / var)


def fit_gmm_1d(data: np.ndarray, k: int = 2, iters: int = 20,
               seed: int = 0) -> Gmm1d:
    """EM fit of a k-component scalar GMM.

    Init is deterministic: means at evenly spaced percentiles (10th/90th for
    k=2), variances at the global variance, uniform weights; `seed` is
    accepted for interface stability but the fit never draws from it. Stops
    after `iters` iterations or once the log-likelihood improves by < 1e-6.
    """
    x = np.asarray(data, dtype=np.float64)
    if len(x) < 2 * k:
        raise ValueError(f"need at least {2 * k} points to fit k={k}, "
                         f"got {len(x)}")
    if k == 1:
        mean = np.array([x.mean()])
        var = np.array([max(x.var(), VARIANCE_FLOOR)])
        ll = float(np.sum(_log_pdf(x, mean, var, np.array([1.0]))))
        return Gmm1d(means=mean, variances=var, weights=np.array([1.0]),
                     log_likelihoods=[ll])
    pcts = np.linspace(10.0, 90.0, k)
    means = np.percentile(x, pcts)
    variances = np.full(k, max(x.var(), VARIANCE_FLOOR))
    weights = np.full(k, 1.0 / k)
    lls: list[float] = []
    for _ in range(iters):
        log_joint = _log_pdf(x, means, variances, weights)
        m = log_joint.max(axis=1, keepdims=True)
        log_total = m[:, 0] + np.log(np.exp(log_joint - m).sum(axis=1))
        ll = float(log_total.sum())
        resp = np.exp(log_joint - log_total[:, None])
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-12)
        means = (resp * x[:, None]).sum(axis=0) / nk
        d = x[:, None] - means[None, :]
        variances = np.maximum((resp * d * d).sum(axis=0) / nk,
                               VARIANCE_FLOOR)
        weights = nk / len(x)
        if lls and ll - lls[-1] < 1e-6:
            lls.append(ll)
            break
        lls.append(ll)
    return Gmm1d(means=means, variances=variances, weights=weights,
                 log_likelihoods=lls)


def frame_log_energy(clip: AudioClip, cfg: VadConfig) -> np.ndarray:
    """log(sum of squares + eps) per unwindowed frame."""
    fm = frame_signal(clip, cfg.frame_ms, cfg.overlap_ms, windowed=False)
    return np.log(np.sum(fm.frames * fm.frames, axis=1) + ENERGY_EPS)


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return mask.copy()
    out = mask.copy()
    idx = np.flatnonzero(mask)
    for i in idx:
        out[max(0, i - radius):i + radius + 1] = True
    return out


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [start, end) runs of True."""
    runs = []
    start = None
    for i, v in enumerate(mask):
        if v and start is None:
            start = i
        elif not v and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


def vad_mask(clip: AudioClip, cfg: VadConfig = VadConfig()) -> VadMask:
    """Per-frame speech/silence decision for the clip.

    Speech frames are those whose posterior under the higher-mean component
    exceeds 0.5, dilated by the hangover and cleaned of sub-minimum runs.
    """
    energies = frame_log_energy(clip, cfg)
    t = len(energies)
    if t < 4:
        raise ValueError(f"clip too short for VAD: only {t} frames")
    gmm = fit_gmm_1d(energies, k=2, iters=cfg.iters, seed=cfg.seed)
    hi = int(np.argmax(gmm.means))
    lo = 1 - hi
    if abs(gmm.means[hi] - gmm.means[lo]) < FAIL_OPEN_SEPARATION:
        speech = np.ones(t, dtype=bool)
    else:
        log_joint = _log_pdf(energies, gmm.means, gmm.variances, gmm.weights)
        m = log_joint.max(axis=1, keepdims=True)
        resp = np.exp(log_joint - m)
        posterior_hi = resp[:, hi] / resp.sum(axis=1)
        speech = posterior_hi > 0.5
        speech = _dilate(speech, cfg.hangover_frames)
        for start, end in _runs(speech):
            if end - start < cfg.min_run_frames:
                speech[start:end] = False
        if not speech.any():
            speech = np.ones(t, dtype=bool)
    return VadMask(speech=speech, hangover_frames=cfg.hangover_frames,
                   min_run_frames=cfg.min_run_frames, frame_ms=cfg.frame_ms,
                   overlap_ms=cfg.overlap_ms)


def trim_silence(clip: AudioClip, mask: VadMask,
                 cfg: VadConfig = VadConfig()) -> AudioClip:
    """Keep only the sample spans covered by speech-marked frames.

    Each maximal run of speech frames [a, b) contributes samples
    [a*hop, (b-1)*hop + frame_len), i.e. hop-long spans plus the tail of the
    run's final frame. Output samples are a subsequence of the input.
    """
    if (mask.frame_ms, mask.overlap_ms) != (cfg.frame_ms, cfg.overlap_ms):
        raise ValueError("mask framing does not match the supplied config")
    n, hop = frame_sizes(cfg.frame_ms, cfg.overlap_ms, clip.sample_rate_hz)
    expected_t = 1 + (len(clip.samples) - n) // hop
    if len(mask.speech) != expected_t:
        raise ValueError(
            f"mask has {len(mask.speech)} frames, clip frames to {expected_t}")
    x = np.asarray(clip.samples)
    spans = [x[a * hop:(b - 1) * hop + n] for a, b in _runs(mask.speech)]
    if not spans:
        raise ValueError("empty mask; vad_mask fails open so this is a bug")
    return AudioClip(samples=np.concatenate(spans),
                     sample_rate_hz=clip.sample_rate_hz)


def mask_string(mask: VadMask) -> str:
    """One '0'/'1' character per frame, for dumping and plotting."""
    return "".join("1" if s else "0" for s in mask.speech)
