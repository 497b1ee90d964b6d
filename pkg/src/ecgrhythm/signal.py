"""Waveform conditioning: baseline removal, resampling, normalization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class EcgRecord:
    """A single-lead ECG waveform.

    Parameters
    ----------
    id : str
        Record identifier.
    fs : float
        Sampling rate (Hz).
    samples : array
        Amplitudes in millivolts.
    label : str, optional
        Reference rhythm label, one of ``N``, ``A``, ``O``, ``~``.
    """

    id: str
    fs: float
    samples: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if not self.fs > 0:
            raise ValueError("sampling rate must be positive")
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("record needs at least one sample")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("invalid signal")

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs


def _as_finite(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("invalid signal")
    if not np.all(np.isfinite(x)):
        raise ValueError("invalid signal")
    return x


def baseline_width(fs: float) -> int:
    """Odd moving-average width nearest to 0.6 s (even ties round up)."""
    return 2 * int(np.floor(0.6 * fs / 2.0)) + 1


def moving_average(samples, width: int) -> np.ndarray:
    """Centered moving average with truncated windows at the edges."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    half = width // 2
    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def remove_baseline(samples, fs: float) -> np.ndarray:
    """Subtract a 0.6 s centered moving average from the signal.

    Parameters
    ----------
    samples : array
        Input signal.
    fs : float
        Sampling rate (Hz).

    Returns
    -------
    array
        Signal with baseline wander removed, same length as the input.
    """
    if not fs > 0:
        raise ValueError("sampling rate must be positive")
    x = _as_finite(samples)
    return x - moving_average(x, baseline_width(fs))


def resample_linear(samples, fs_in: float, fs_out: float) -> np.ndarray:
    """Linearly interpolate ``samples`` from ``fs_in`` onto a grid at ``fs_out``.

    The output spans the same time interval as the input and has
    ``floor((n - 1) * fs_out / fs_in) + 1`` samples.
    """
    if not (fs_in > 0 and fs_out > 0):
        raise ValueError("sampling rates must be positive")
    x = _as_finite(samples)
    n = x.size
    if n < 2:
        raise ValueError("too short to resample")
    if fs_in == fs_out:
        return x.copy()
    # guard against (n-1)*fs_out/fs_in landing just below an integer
    m = int(np.floor((n - 1) * fs_out / fs_in + 1e-9)) + 1
    t_out = np.arange(m) * (fs_in / fs_out)
    t_out[-1] = min(t_out[-1], n - 1)
    return np.interp(t_out, np.arange(n), x)


def normalize_unit(samples) -> np.ndarray:
    """Map samples affinely onto [0, 1]; a constant signal maps to 0.5."""
    x = _as_finite(samples)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.full_like(x, 0.5)
    y = (x - lo) / (hi - lo)
    return np.clip(y, 0.0, 1.0)
