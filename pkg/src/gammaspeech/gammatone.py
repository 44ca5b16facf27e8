"""Gammatone filterbank on the ERB-number scale, applied as FFT-bin weights.

The filterbank lives entirely in the frequency domain: each channel is the
magnitude response of a fourth-order gammatone evaluated at the FFT bin
frequencies, peak-normalized per row. Weighting a magnitude spectrogram is
then a single matrix product, which keeps the whole stage linear and cheap
while preserving the auditory frequency resolution: channels crowd together
at low frequencies and spread out at high ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import Spectrogram

DEFAULT_CHANNELS = 64
DEFAULT_FMIN_HZ = 50.0
DEFAULT_FMAX_HZ = 8000.0
DEFAULT_ORDER = 4
DEFAULT_BANDWIDTH_SCALE = 1.019


@dataclass
class GammatoneFilterbank:
    weights: np.ndarray          # C x K, rows peak-normalized to 1
    center_freqs_hz: np.ndarray  # C ascending
    nfft: int
    sample_rate_hz: int
    order: int = DEFAULT_ORDER
    bandwidth_scale: float = DEFAULT_BANDWIDTH_SCALE


@dataclass
class Gammatonegram:
    energies: np.ndarray         # C x T
    center_freqs_hz: np.ndarray
    hop_samples: int
    sample_rate_hz: int


def erb_bandwidth(fc_hz):
    """Equivalent rectangular bandwidth at center frequency fc (Glasberg-Moore)."""
    if np.any(np.asarray(fc_hz) < 0):
        raise ValueError(f"negative center frequency {fc_hz}")
    return 24.7 * (4.37 * fc_hz / 1000.0 + 1.0)


def erb_number(f_hz: float | np.ndarray) -> float | np.ndarray:
    """Map frequency in Hz onto the ERB-number scale."""
    return 21.4 * np.log10(4.37 * np.asarray(f_hz, dtype=np.float64) / 1000.0 + 1.0)


def erb_number_to_hz(e: float | np.ndarray) -> float | np.ndarray:
    """Inverse of erb_number()."""
    return (10.0 ** (np.asarray(e, dtype=np.float64) / 21.4) - 1.0) * 1000.0 / 4.37


def erb_space(fmin_hz: float, fmax_hz: float, c: int) -> np.ndarray:
    """c center frequencies uniformly spaced on the ERB-number scale."""
    if c < 2:
        raise ValueError(f"need at least 2 channels, got {c}")
    if not 0 < fmin_hz < fmax_hz:
        raise ValueError(f"need 0 < fmin < fmax, got {fmin_hz}/{fmax_hz}")
    points = np.linspace(erb_number(fmin_hz), erb_number(fmax_hz), c)
    centers = np.asarray(erb_number_to_hz(points), dtype=np.float64)
    # linspace endpoints are exact; pin the mapped endpoints too
    centers[0] = fmin_hz
    centers[-1] = fmax_hz
    return centers


def gammatone_weights(nfft: int, sample_rate_hz: int,
                      c: int = DEFAULT_CHANNELS,
                      fmin_hz: float = DEFAULT_FMIN_HZ,
                      fmax_hz: float = DEFAULT_FMAX_HZ,
                      order: int = DEFAULT_ORDER,
                      bandwidth_scale: float = DEFAULT_BANDWIDTH_SCALE,
                      ) -> GammatoneFilterbank:
    """Build the C x (nfft/2 + 1) spectral weight matrix.

    Channel weight at bin frequency f for a channel centered at fc with
    bandwidth b is [1 + ((f - fc)/b)^2]^(-order/2), then the row is divided
    by its maximum so every channel peaks at exactly 1.
    """
    if nfft < 2 or (nfft & (nfft - 1)) != 0:
        raise ValueError(f"nfft must be a power of two, got {nfft}")
    if fmax_hz > sample_rate_hz / 2:
        raise ValueError(
            f"fmax {fmax_hz} above Nyquist {sample_rate_hz / 2}")
    centers = erb_space(fmin_hz, fmax_hz, c)
    bin_freqs = np.arange(nfft // 2 + 1) * (sample_rate_hz / nfft)
    b = bandwidth_scale * erb_bandwidth(centers)
    ratio = (bin_freqs[None, :] - centers[:, None]) / b[:, None]
    raw = (1.0 + ratio * ratio) ** (-order / 2.0)
    weights = raw / raw.max(axis=1, keepdims=True)
    for row in range(weights.shape[0]):
        peaks = np.flatnonzero(weights[row] == 1.0)
        if len(peaks) != 1:
            raise AssertionError(
                f"channel {row}: {len(peaks)} bins tie at the peak")
    return GammatoneFilterbank(weights=weights, center_freqs_hz=centers,
                               nfft=nfft, sample_rate_hz=sample_rate_hz,
                               order=order, bandwidth_scale=bandwidth_scale)


def gammatonegram(spec: Spectrogram, fb: GammatoneFilterbank) -> Gammatonegram:
    """Weight a magnitude spectrogram by the filterbank: energies = W @ mags."""
    k = spec.mags.shape[0]
    if fb.weights.shape[1] != k:
        raise ValueError(
            f"filterbank has {fb.weights.shape[1]} bins, spectrogram has {k}")
    if fb.nfft != spec.nfft or fb.sample_rate_hz != spec.sample_rate_hz:
        raise ValueError("filterbank and spectrogram nfft/sample rate differ")
    return Gammatonegram(energies=fb.weights @ spec.mags,
                         center_freqs_hz=fb.center_freqs_hz,
                         hop_samples=spec.hop_samples,
                         sample_rate_hz=spec.sample_rate_hz)


def dump_filterbank(fb: GammatoneFilterbank) -> str:
    """Text dump, one whitespace-separated row per channel (for plotting)."""
    lines = []
    for row in fb.weights:
        lines.append(" ".join(f"{w:.8g}" for w in row))
    return "\n".join(lines) + "\n"
