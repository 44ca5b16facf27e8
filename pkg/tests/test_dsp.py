import numpy as np
import pytest

from gammaspeech import (AudioClip, StftConfig, fft_magnitude, frame_signal,
                         hamming_window, pre_emphasis, spectrogram)


def naive_dft_magnitude(frame, nfft):
    """Independent O(n^2) DFT oracle for the half spectrum."""
    x = np.zeros(nfft)
    x[:len(frame)] = frame
    n = np.arange(nfft)
    k = np.arange(nfft // 2 + 1)[:, None]
    re = np.cos(-2.0 * np.pi * k * n / nfft) @ x
    im = np.sin(-2.0 * np.pi * k * n / nfft) @ x
    return np.sqrt(re * re + im * im)


class TestPreEmphasis:
    def test_impulse_response(self):
        clip = pre_emphasis(AudioClip(np.array([1.0, 0.0, 0.0])), 0.97)
        np.testing.assert_array_equal(clip.samples, [1.0, -0.97, 0.0])

    def test_alpha_zero_is_identity(self, rng):
        x = rng.standard_normal(100)
        np.testing.assert_array_equal(
            pre_emphasis(AudioClip(x), 0.0).samples, x)

    def test_matches_difference_loop(self, rng):
        x = rng.standard_normal(1000)
        got = pre_emphasis(AudioClip(x), 0.97).samples
        want = np.empty_like(x)
        want[0] = x[0]
        for i in range(1, len(x)):
            want[i] = x[i] - 0.97 * x[i - 1]
        np.testing.assert_array_equal(got, want)

    def test_alpha_validated(self):
        for bad in (-0.1, 1.0, 1.5):
            with pytest.raises(ValueError):
                pre_emphasis(AudioClip(np.zeros(4)), bad)


class TestHammingWindow:
    def test_endpoint(self):
        assert hamming_window(5)[0] == pytest.approx(0.08, abs=1e-12)

    def test_center_of_odd_window(self):
        assert hamming_window(5)[2] == 1.0

    def test_exact_symmetry(self):
        w = hamming_window(400)
        assert np.max(np.abs(w - w[::-1])) == 0.0

    def test_formula(self):
        n = 64
        w = hamming_window(n)
        want = 0.54 - 0.46 * np.cos(2 * np.pi * np.arange(n) / (n - 1))
        np.testing.assert_allclose(w, want, atol=1e-15)

    def test_too_short(self):
        with pytest.raises(ValueError):
            hamming_window(1)


class TestFraming:
    def test_one_second_at_16k(self):
        clip = AudioClip(np.zeros(16000), 16000)
        fm = frame_signal(clip, frame_ms=25.0, overlap_ms=10.0)
        assert fm.frame_len_samples == 400
        assert fm.hop_samples == 240
        assert fm.frames.shape == (66, 400)

    def test_constant_signal_rows_identical(self):
        clip = AudioClip(np.ones(4000), 16000)
        fm = frame_signal(clip, windowed=False)
        assert np.all(fm.frames == fm.frames[0])

    def test_zero_overlap_partitions(self, rng):
        x = rng.standard_normal(4000)
        fm = frame_signal(AudioClip(x), frame_ms=25.0, overlap_ms=0.0,
                          windowed=False)
        t, n = fm.frames.shape
        np.testing.assert_array_equal(fm.frames.ravel(), x[:t * n])

    def test_index_property(self, rng):
        """Frame t sample i is window[i] * signal[t*H + i]."""
        x = rng.standard_normal(3000)
        fm = frame_signal(AudioClip(x), windowed=True)
        w = hamming_window(fm.frame_len_samples)
        for t in (0, 3, fm.frames.shape[0] - 1):
            np.testing.assert_array_equal(
                fm.frames[t],
                w * x[t * fm.hop_samples:t * fm.hop_samples
                      + fm.frame_len_samples])

    def test_short_clip_rejected(self):
        with pytest.raises(ValueError):
            frame_signal(AudioClip(np.zeros(100), 16000))


class TestFftMagnitude:
    def test_bin_aligned_cosine(self):
        nfft, k0 = 512, 37
        frame = np.cos(2 * np.pi * k0 * np.arange(nfft) / nfft)
        mags = fft_magnitude(frame, nfft)
        assert mags[k0] == pytest.approx(nfft / 2, rel=1e-12)
        others = np.delete(mags, k0)
        assert np.max(others) < 1e-9

    def test_zero_frame(self):
        assert np.all(fft_magnitude(np.zeros(400), 512) == 0.0)

    def test_against_naive_dft(self, rng):
        for _ in range(100):
            nfft = int(rng.choice([256, 512, 1024]))
            frame = rng.standard_normal(min(400, nfft))
            got = fft_magnitude(frame, nfft)
            want = naive_dft_magnitude(frame, nfft)
            assert np.max(np.abs(got - want)) < 1e-9

    def test_parseval_per_frame(self, rng):
        nfft = 512
        for _ in range(20):
            frame = rng.standard_normal(400)
            half = fft_magnitude(frame, nfft) ** 2
            # full spectrum from the half by conjugate symmetry
            full = half.sum() + half[1:-1].sum()
            energy = nfft * np.sum(frame * frame)
            assert abs(full - energy) <= 1e-9 * energy

    def test_nfft_validation(self):
        with pytest.raises(ValueError):
            fft_magnitude(np.zeros(100), 500)
        with pytest.raises(ValueError):
            fft_magnitude(np.zeros(600), 512)


class TestSpectrogram:
    def test_shape_one_second(self):
        clip = AudioClip(np.sin(np.arange(16000) * 0.1), 16000)
        spec = spectrogram(clip)
        assert spec.mags.shape == (257, 66)

    def test_silence_all_zero(self):
        spec = spectrogram(AudioClip(np.zeros(8000), 16000))
        assert np.all(spec.mags == 0.0)

    def test_composition_equality(self, rng):
        clip = AudioClip(rng.standard_normal(5000), 16000)
        cfg = StftConfig()
        spec = spectrogram(clip, cfg)
        emphasized = pre_emphasis(clip, cfg.alpha)
        fm = frame_signal(emphasized, cfg.frame_ms, cfg.overlap_ms,
                          windowed=True)
        for t in range(fm.frames.shape[0]):
            np.testing.assert_array_equal(
                spec.mags[:, t], fft_magnitude(fm.frames[t], cfg.nfft))
