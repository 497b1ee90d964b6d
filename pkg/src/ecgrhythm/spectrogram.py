"""Short-time magnitude spectra and QRS-anchored model-input segments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WINDOW = 75
HOP = 12
NFFT = 128
N_BINS = 20
MAIN_WIDTH = 375
SECONDARY_WIDTH = 225


@dataclass
class Spectrogram:
    magnitudes: np.ndarray  # (N_BINS, T)
    bin_hz: float
    hop_samples: int
    fs: float

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[1]


@dataclass
class SpectroSegment:
    matrix: np.ndarray  # (N_BINS, width)
    anchor_peak: int


def frame_count(n_samples: int) -> int:
    """Frames produced for ``n_samples`` after tail padding."""
    return n_samples // HOP + 1


def stft_magnitude(samples, fs: float, log: bool = True) -> Spectrogram:
    """Hamming-windowed STFT magnitude, cropped to the lowest 20 bins.

    Frames are 75 samples long with a hop of 12, zero-padded to a 128-point
    FFT. The signal is padded with 75 zeros at the tail so records of exactly
    15 s or 9 s at 300 Hz still yield a full 375- or 225-frame segment.

    Parameters
    ----------
    samples : array
        Input signal, at least 75 samples.
    fs : float
        Sampling rate (Hz).
    log : bool, optional
        Apply ``log(1 + m)`` compression (default). Set False for raw
        magnitudes.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < WINDOW:
        raise ValueError(f"signal shorter than the {WINDOW}-sample window")
    if not np.all(np.isfinite(x)):
        raise ValueError("invalid signal")
    padded = np.concatenate([x, np.zeros(WINDOW)])
    frames = np.lib.stride_tricks.sliding_window_view(padded, WINDOW)[::HOP]
    spectrum = np.fft.rfft(frames * np.hamming(WINDOW), n=NFFT, axis=1)
    mag = np.abs(spectrum[:, :N_BINS]).T
    if log:
        mag = np.log1p(mag)
    return Spectrogram(magnitudes=np.ascontiguousarray(mag), bin_hz=fs / NFFT,
                       hop_samples=HOP, fs=fs)


def extract_segments(spec: Spectrogram, peaks, width: int) -> list[SpectroSegment]:
    """Cut ``N_BINS x width`` blocks starting at the frame of each peak.

    Peaks whose block would run past the last frame are skipped.
    """
    out = []
    T = spec.n_frames
    for p in np.asarray(peaks, dtype=int):
        start = int(p) // spec.hop_samples
        if start + width <= T:
            out.append(SpectroSegment(spec.magnitudes[:, start:start + width].copy(), int(p)))
    return out


def write_segment_csv(segment: SpectroSegment, path) -> None:
    np.savetxt(path, segment.matrix, delimiter=",", fmt="%.17g")


def read_segment_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)
