"""Signal-quality indices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .qrs import match_peaks

BSQI_TOLERANCE_S = 0.15


@dataclass
class SqiResult:
    template_sqi: Optional[float]
    bsqi: float


def beat_windows(samples, fs, peaks) -> np.ndarray:
    """Stack the complete beat windows around ``peaks``.

    Each window starts ``0.25 * median(RR)`` before its peak and spans
    ``round(0.7 * median(RR))`` samples. Windows that would run off either
    end of the record are dropped. Returns an array of shape
    ``(n_beats, length)``, possibly with zero rows.
    """
    x = np.asarray(samples, dtype=float)
    p = np.asarray(peaks, dtype=int)
    if p.size < 2:
        return np.zeros((0, 0))
    med = float(np.median(np.diff(p)))
    length = int(round(0.7 * med))
    before = int(round(0.25 * med))
    if length < 2:
        return np.zeros((0, max(length, 0)))
    starts = p - before
    ok = (starts >= 0) & (starts + length <= x.size)
    starts = starts[ok]
    if starts.size == 0:
        return np.zeros((0, length))
    return x[starts[:, None] + np.arange(length)[None, :]]


def _pearson_rows(beats, template):
    """Correlation of each row with ``template``; zero-variance rows give 0."""
    bc = beats - beats.mean(axis=1, keepdims=True)
    tc = template - template.mean()
    num = bc @ tc
    den = np.sqrt((bc ** 2).sum(axis=1) * (tc ** 2).sum())
    out = np.zeros(beats.shape[0])
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    return np.clip(out, -1.0, 1.0)


def template_match_sqi(samples, fs: float, peaks) -> Optional[float]:
    """Average template-matching correlation coefficient.

    The template is the pointwise mean of all complete beat windows, and
    the index is the mean Pearson correlation of each beat with it.
    Returns None when fewer than two complete beats are available.
    """
    beats = beat_windows(samples, fs, peaks)
    if beats.shape[0] < 2:
        return None
    template = beats.mean(axis=0)
    return float(np.mean(_pearson_rows(beats, template)))


def bsqi(peaks_a, peaks_b, fs: float) -> float:
    """Agreement between two detectors: matched / (|A| + |B| - matched)."""
    a = np.asarray(peaks_a)
    b = np.asarray(peaks_b)
    if a.size == 0 and b.size == 0:
        return 1.0
    matched = match_peaks(a, b, fs, BSQI_TOLERANCE_S)
    return matched / (a.size + b.size - matched)
