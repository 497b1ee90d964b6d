import numpy as np
import pytest

from ecgrhythm.spectrogram import (HOP, MAIN_WIDTH, N_BINS, NFFT, SECONDARY_WIDTH,
                                   extract_segments, frame_count, read_segment_csv,
                                   stft_magnitude, write_segment_csv)


def reference_stft(x, fs):
    """Direct per-frame DFT sums, independent of the strided framing."""
    padded = np.concatenate([x, np.zeros(75)])
    T = (padded.size - 75) // 12 + 1
    win = 0.54 - 0.46 * np.cos(2 * np.pi * np.arange(75) / 74)
    k = np.arange(N_BINS)[:, None]
    n = np.arange(75)[None, :]
    basis = np.exp(-2j * np.pi * k * n / NFFT)
    out = np.empty((N_BINS, T))
    for t in range(T):
        out[:, t] = np.abs(basis @ (padded[t * 12:t * 12 + 75] * win))
    return out


def test_matches_direct_dft():
    x = np.random.default_rng(0).normal(size=900)
    spec = stft_magnitude(x, 300, log=False)
    np.testing.assert_allclose(spec.magnitudes, reference_stft(x, 300), atol=1e-10)
    np.testing.assert_allclose(stft_magnitude(x, 300).magnitudes, np.log1p(spec.magnitudes))


def test_fifteen_seconds_fit_main_width():
    spec = stft_magnitude(np.random.default_rng(1).normal(size=4500), 300)
    assert (4500 - 75) // 12 + 1 == 369
    assert spec.n_frames == frame_count(4500) == 376
    assert spec.n_frames >= MAIN_WIDTH
    assert spec.magnitudes.shape[0] == 20
    assert spec.bin_hz == pytest.approx(300 / 128)
    assert N_BINS * spec.bin_hz == pytest.approx(46.875)


def test_zero_signal():
    spec = stft_magnitude(np.zeros(1000), 300)
    assert np.all(spec.magnitudes == 0)


def test_bin_centred_sinusoid_peaks_at_bin_ten():
    fs = 300
    t = np.arange(3000) / fs
    x = np.sin(2 * np.pi * (10 * fs / NFFT) * t)
    spec = stft_magnitude(x, fs)
    assert int(np.argmax(spec.magnitudes.mean(axis=1))) == 10


def test_too_short():
    with pytest.raises(ValueError):
        stft_magnitude(np.zeros(74), 300)


def test_linear_in_amplitude():
    x = np.random.default_rng(3).normal(size=2000)
    a = stft_magnitude(x, 300, log=False).magnitudes
    b = stft_magnitude(2 * x, 300, log=False).magnitudes
    np.testing.assert_allclose(b, 2 * a, rtol=1e-12, atol=1e-12)


def test_energy_grows_with_noise_variance():
    base = np.random.default_rng(4).normal(size=3000)
    energies = [np.sum(stft_magnitude(s * base, 300, log=False).magnitudes ** 2)
                for s in (0.1, 0.5, 1.0, 2.0, 5.0)]
    assert np.all(np.diff(energies) >= 0)


def test_segments_from_sixty_seconds():
    spec = stft_magnitude(np.random.default_rng(5).normal(size=18000), 300)
    peaks = np.arange(100, 40 * 300, 250)
    segs = extract_segments(spec, peaks, MAIN_WIDTH)
    assert len(segs) == peaks.size
    assert all(s.matrix.shape == (20, MAIN_WIDTH) for s in segs)
    assert [s.anchor_peak for s in segs] == list(peaks)
    np.testing.assert_array_equal(segs[1].matrix, spec.magnitudes[:, 350 // HOP:350 // HOP + 375])


def test_late_peak_skipped():
    spec = stft_magnitude(np.zeros(18000), 300)
    assert extract_segments(spec, [55 * 300], MAIN_WIDTH) == []


def test_nine_seconds_single_segment():
    spec = stft_magnitude(np.random.default_rng(6).normal(size=2700), 300)
    segs = extract_segments(spec, [0], SECONDARY_WIDTH)
    assert len(segs) == 1 and segs[0].matrix.shape == (20, 225)


def test_segment_csv_roundtrip(tmp_path):
    spec = stft_magnitude(np.random.default_rng(7).normal(size=2700), 300)
    seg = extract_segments(spec, [0], SECONDARY_WIDTH)[0]
    write_segment_csv(seg, tmp_path / "s.csv")
    np.testing.assert_array_equal(read_segment_csv(tmp_path / "s.csv"), seg.matrix)
