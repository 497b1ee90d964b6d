"""R-peak detection and RR-interval derivation.

Two independent detectors are provided. :func:`detect_pan_tompkins` is the
classic band-pass / derivative / squaring / integration chain with adaptive
thresholds and search-back. :func:`detect_filtered_derivative` is a simpler
slope detector used as the second opinion for bSQI.
"""

from __future__ import annotations

import numpy as np
import scipy.signal as ss
from scipy import ndimage

REFRACTORY_S = 0.2
REFINE_S = 0.05
# filtered-derivative detections must exceed this multiple of the rolling median slope
NOISE_FLOOR_RATIO = 8.0


def _check_input(samples, fs):
    x = np.asarray(samples, dtype=float)
    if fs < 100:
        raise ValueError("sampling rate below 100 Hz")
    if x.ndim != 1 or x.size < 2 * fs:
        raise ValueError("insufficient signal")
    if not np.all(np.isfinite(x)):
        raise ValueError("invalid signal")
    return x


def bandpass(samples, fs: float, low: float, high: float, order: int = 2) -> np.ndarray:
    """Zero-phase Butterworth band-pass."""
    sos = ss.butter(order, [low, high], btype="bandpass", fs=fs, output="sos")
    return ss.sosfiltfilt(sos, samples)


def _refine(peaks, reference, fs):
    """Move each detection to the maximum of ``reference`` within +-50 ms."""
    half = int(round(REFINE_S * fs))
    n = reference.size
    out = []
    for p in peaks:
        lo, hi = max(p - half, 0), min(p + half + 1, n)
        out.append(lo + int(np.argmax(reference[lo:hi])))
    return np.asarray(out, dtype=int)


def _enforce_refractory(peaks, amplitude, gap):
    """Drop the smaller of any two peaks closer than ``gap`` samples."""
    kept = []
    for p in np.unique(peaks):
        if kept and p - kept[-1] < gap:
            if amplitude[p] > amplitude[kept[-1]]:
                kept[-1] = p
            continue
        kept.append(p)
    return np.asarray(kept, dtype=int)


def detect_pan_tompkins(samples, fs: float) -> np.ndarray:
    """Pan-Tompkins QRS detector.

    Parameters
    ----------
    samples : array
        ECG signal (any amplitude scale; thresholds are adaptive).
    fs : float
        Sampling rate (Hz), at least 100.

    Returns
    -------
    array
        Strictly increasing R-peak sample indices, separated by at least
        200 ms.
    """
    x = _check_input(samples, fs)
    refractory = int(round(REFRACTORY_S * fs))

    bp = bandpass(x, fs, 5.0, 15.0)
    deriv = np.convolve(bp, np.array([1.0, 2.0, 0.0, -2.0, -1.0]) * (fs / 8.0), mode="same")
    squared = deriv ** 2
    width = max(int(round(0.15 * fs)), 1)
    mwi = ndimage.uniform_filter1d(squared, width, mode="constant")
    if not np.any(mwi > 0):
        return np.zeros(0, dtype=int)

    candidates, _ = ss.find_peaks(mwi, distance=refractory)
    if candidates.size == 0:
        return np.zeros(0, dtype=int)

    learn = int(2 * fs)
    spki = 0.25 * mwi[:learn].max()
    npki = 0.5 * mwi[:learn].mean()
    thr1 = npki + 0.25 * (spki - npki)

    slope_half = int(round(0.075 * fs))
    def max_slope(i):
        lo, hi = max(i - slope_half, 0), min(i + slope_half + 1, x.size)
        return np.abs(deriv[lo:hi]).max()

    qrs: list[int] = []
    slopes: list[float] = []
    pending: list[int] = []  # noise candidates since the last QRS, for search-back
    for c in candidates:
        v = mwi[c]
        # search-back for a missed beat when the current gap is overlong
        if len(qrs) >= 2:
            rr_avg = np.mean(np.diff(qrs[-9:]))
            if c - qrs[-1] > 1.66 * rr_avg and pending:
                thr2 = 0.5 * thr1
                best = max(pending, key=lambda i: mwi[i])
                if mwi[best] > thr2 and best - qrs[-1] >= refractory:
                    qrs.append(best)
                    slopes.append(max_slope(best))
                    spki = 0.25 * mwi[best] + 0.75 * spki
                    thr1 = npki + 0.25 * (spki - npki)
                pending = [p for p in pending if p > qrs[-1]]

        is_qrs = v > thr1 and (not qrs or c - qrs[-1] >= refractory)
        if is_qrs and qrs and c - qrs[-1] < int(round(0.36 * fs)):
            # T-wave discrimination
            if max_slope(c) < 0.5 * slopes[-1]:
                is_qrs = False
        if is_qrs:
            qrs.append(int(c))
            slopes.append(max_slope(c))
            spki = 0.125 * v + 0.875 * spki
            pending = []
        else:
            npki = 0.125 * v + 0.875 * npki
            pending.append(int(c))
        thr1 = npki + 0.25 * (spki - npki)

    if not qrs:
        return np.zeros(0, dtype=int)
    peaks = _refine(np.asarray(qrs), bp, fs)
    return _enforce_refractory(peaks, bp, refractory)


def detect_filtered_derivative(samples, fs: float) -> np.ndarray:
    """Slope-threshold QRS detector.

    The 8-20 Hz band-passed signal is differentiated; local maxima of the
    absolute derivative above ``0.4`` times its rolling 2 s 95th percentile
    are detections, provided they also stand well clear of the rolling
    median slope (which rejects broadband noise). Detections are refined to
    band-passed maxima and separated by a 200 ms refractory period.
    """
    x = _check_input(samples, fs)
    refractory = int(round(REFRACTORY_S * fs))

    bp = bandpass(x, fs, 8.0, 20.0)
    slope = np.abs(np.gradient(bp))
    if not np.any(slope > 0):
        return np.zeros(0, dtype=int)

    window = int(round(2 * fs))
    p95 = ndimage.percentile_filter(slope, 95, size=window, mode="reflect")
    floor = ndimage.median_filter(slope, size=window, mode="reflect")
    threshold = np.maximum(0.4 * p95, NOISE_FLOOR_RATIO * floor)

    candidates, _ = ss.find_peaks(slope, height=threshold, distance=refractory)
    if candidates.size == 0:
        return np.zeros(0, dtype=int)
    peaks = _refine(candidates, bp, fs)
    return _enforce_refractory(peaks, bp, refractory)


def rr_intervals_ms(peaks, fs: float) -> np.ndarray:
    """Successive R-peak differences in milliseconds."""
    p = np.asarray(peaks, dtype=float)
    if p.size < 2:
        return np.zeros(0)
    return np.diff(p) * (1000.0 / fs)


def match_peaks(reference, detected, fs: float, tolerance_s: float = 0.15):
    """Count one-to-one matches between two sorted peak lists.

    A time-ordered merge pairs peaks that lie within ``tolerance_s`` of each
    other; the procedure is symmetric in its two arguments.
    """
    a = np.asarray(reference)
    b = np.asarray(detected)
    tol = tolerance_s * fs
    i = j = matched = 0
    while i < a.size and j < b.size:
        if abs(a[i] - b[j]) <= tol:
            matched += 1
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return matched
