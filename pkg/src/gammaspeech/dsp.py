"""Short-time spectral analysis: pre-emphasis, framing, windowing, FFT magnitude.

All stages are pure functions of their inputs; the spectrogram column for
frame t is exactly fft_magnitude() of the windowed, pre-emphasized frame t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip


@dataclass(frozen=True)
class StftConfig:
    alpha: float = 0.97
    frame_ms: float = 25.0
    overlap_ms: float = 10.0
    nfft: int = 512


@dataclass
class FrameMatrix:
    frames: np.ndarray          # T x N
    frame_len_samples: int
    hop_samples: int
    sample_rate_hz: int


@dataclass
class Spectrogram:
    mags: np.ndarray            # K x T, K = nfft/2 + 1
    nfft: int
    hop_samples: int
    sample_rate_hz: int

    @property
    def bin_hz(self) -> float:
        return self.sample_rate_hz / self.nfft


def pre_emphasis(clip: AudioClip, alpha: float = 0.97) -> AudioClip:
    """Single-pole high-pass difference: y[n] = x[n] - alpha * x[n-1]."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    x = np.asarray(clip.samples, dtype=np.float64)
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - alpha * x[:-1]
    return AudioClip(samples=y, sample_rate_hz=clip.sample_rate_hz)


def hamming_window(n: int) -> np.ndarray:
    """Symmetric Hamming window w[i] = 0.54 - 0.46*cos(2*pi*i/(n-1))."""
    if n < 2:
        raise ValueError(f"window length must be >= 2, got {n}")
    i = np.arange(n, dtype=np.float64)
    w = 0.54 - 0.46 * np.cos(2.0 * np.pi * i / (n - 1))
    # Mirror the first half so w[i] == w[n-1-i] holds bit-exactly.
    half = n // 2
    w[n - half:] = w[:half][::-1]
    return w


def frame_sizes(frame_ms: float, overlap_ms: float,
                sample_rate_hz: int) -> tuple[int, int]:
    """Frame length N and hop H in samples for the given durations."""
    if overlap_ms < 0 or frame_ms <= overlap_ms:
        raise ValueError(
            f"need frame_ms > overlap_ms >= 0, got {frame_ms}/{overlap_ms}")
    n = int(round(frame_ms * sample_rate_hz / 1000.0))
    hop = int(round((frame_ms - overlap_ms) * sample_rate_hz / 1000.0))
    return n, hop


def frame_signal(clip: AudioClip, frame_ms: float = 25.0,
                 overlap_ms: float = 10.0, windowed: bool = True,
                 ) -> FrameMatrix:
    """Slice the clip into frames of N samples at stride H.

    Trailing samples shorter than one frame are dropped. When `windowed`,
    each frame is multiplied by the Hamming window.
    """
    n, hop = frame_sizes(frame_ms, overlap_ms, clip.sample_rate_hz)
    x = np.asarray(clip.samples, dtype=np.float64)
    if len(x) < n:
        raise ValueError(
            f"clip of {len(x)} samples is shorter than one {n}-sample frame")
    t = 1 + (len(x) - n) // hop
    idx = hop * np.arange(t)[:, None] + np.arange(n)[None, :]
    frames = x[idx]
    if windowed:
        frames = frames * hamming_window(n)[None, :]
    return FrameMatrix(frames=frames, frame_len_samples=n, hop_samples=hop,
                       sample_rate_hz=clip.sample_rate_hz)


def fft_magnitude(frame: np.ndarray, nfft: int) -> np.ndarray:
    """|DFT| of a zero-padded frame for bins 0..nfft/2."""
    frame = np.asarray(frame, dtype=np.float64)
    if nfft < 1 or (nfft & (nfft - 1)) != 0:
        raise ValueError(f"nfft must be a power of two, got {nfft}")
    if nfft < len(frame):
        raise ValueError(f"nfft {nfft} smaller than frame length {len(frame)}")
    return np.abs(np.fft.rfft(frame, n=nfft))


def spectrogram(clip: AudioClip, cfg: StftConfig = StftConfig()) -> Spectrogram:
    """Magnitude spectrogram of the pre-emphasized, windowed framing."""
    emphasized = pre_emphasis(clip, cfg.alpha)
    fm = frame_signal(emphasized, cfg.frame_ms, cfg.overlap_ms, windowed=True)
    cols = [fft_magnitude(fm.frames[t], cfg.nfft)
            for t in range(fm.frames.shape[0])]
    mags = np.stack(cols, axis=1)
    return Spectrogram(mags=mags, nfft=cfg.nfft, hop_samples=fm.hop_samples,
                       sample_rate_hz=clip.sample_rate_hz)
