"""Hand-crafted features for the NSR-vs-other post-classifier.

The vector has 437 entries in five groups:

====================  =====
signal quality            2
frequency content        10
beat-to-beat interval    11
phase-space grid        401
Poincare section         13
====================  =====

Missing values are NaN and propagate; nothing here raises on a short or
beat-free record.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qrs as _qrs
from .signal import EcgRecord, normalize_unit
from .sqi import bsqi, template_match_sqi

BANDS = ((1, 15), (15, 30), (30, 45), (45, 60), (60, 75), (75, 90), (90, 150), (5, 14), (5, 50))
RR_NAMES = ("count", "min", "max", "median", "mean", "sdnn", "rmssd", "mean_hr", "pi", "gi", "si")
POINCARE_NAMES = (
    "n_crossings", "crossings_per_1000", "u_mean", "u_sd", "u_min", "u_max",
    "gap_mean", "gap_sd", "dist_mean", "dist_max", "frac_above", "excursion_mean",
    "excursion_sd",
)
RPS_DELAY = 4
GRID = 20


def _registry():
    names = ["sqi_template", "sqi_bsqi"]
    names += [f"band_{lo}_{hi}_median" for lo, hi in BANDS]
    names += ["band_ratio_5_14_over_5_50"]
    names += [f"rr_{n}" for n in RR_NAMES]
    names += [f"rps_cell_{r:02d}_{c:02d}" for r in range(GRID) for c in range(GRID)]
    names += ["rps_sfi"]
    names += [f"psec_{n}" for n in POINCARE_NAMES]
    return tuple(names)


FEATURE_NAMES = _registry()
CATEGORY_SIZES = {"quality": 2, "frequency": 10, "rr": 11, "rps": 401, "poincare": 13}
N_FEATURES = len(FEATURE_NAMES)


@dataclass
class PhaseSpace:
    points: np.ndarray  # (n - delay, 2)


def band_power_features(samples, fs: float) -> np.ndarray:
    """Median periodogram ordinate in nine bands, plus a 5-14 / 5-50 Hz ratio.

    The periodogram is ``|DFT|^2 / n`` over the full record. Bands are
    half-open ``[lo, hi)`` and clipped at Nyquist (inclusive); a band with
    no ordinates is NaN. The ratio compares summed power and is NaN when the
    5-50 Hz power is below 1e-12.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    power = np.abs(np.fft.rfft(x)) ** 2 / n
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    nyquist = fs / 2.0
    out = np.full(10, np.nan)
    for i, (lo, hi) in enumerate(BANDS):
        if hi > nyquist:
            sel = (freqs >= lo) & (freqs <= nyquist)
        else:
            sel = (freqs >= lo) & (freqs < hi)
        if sel.any():
            out[i] = np.median(power[sel])
    num = power[(freqs >= 5) & (freqs < 14)].sum()
    den = power[(freqs >= 5) & (freqs < 50)].sum()
    if den >= 1e-12:
        out[9] = num / den
    return out


def hra_indices(rr_ms):
    """Heart-rate asymmetry (PI, GI, SI) in percent.

    On the Poincare plot of ``(RR_i, RR_i+1)``, PI is the share of off-line
    points lying below the identity line, GI the
    share of summed distance to the line contributed by points above it, and
    SI the same for angular deviation from 45 degrees. All three are NaN when
    no point lies off the line.
    """
    rr = np.asarray(rr_ms, dtype=float)
    if rr.size < 2:
        return (np.nan, np.nan, np.nan)
    x, y = rr[:-1], rr[1:]
    delta = y - x
    off = delta != 0
    if not off.any():
        return (np.nan, np.nan, np.nan)
    above = delta > 0
    below = delta < 0
    dist = np.abs(delta) / np.sqrt(2.0)
    theta = np.abs(45.0 - np.degrees(np.arctan2(y, x)))
    pi = 100.0 * below.sum() / off.sum()
    gi = 100.0 * dist[above].sum() / dist[off].sum()
    theta_total = theta[off].sum()
    si = 100.0 * theta[above].sum() / theta_total if theta_total > 0 else np.nan
    return (float(pi), float(gi), float(si))


def rr_statistics(rr_ms) -> np.ndarray:
    """Count, min, max, median, mean, SDNN, RMSSD, mean HR, PI, GI, SI.

    SDNN is the population standard deviation. With fewer than two
    intervals SDNN, RMSSD and the asymmetry indices are NaN.
    """
    rr = np.asarray(rr_ms, dtype=float)
    out = np.full(11, np.nan)
    out[0] = rr.size
    if rr.size == 0:
        return out
    out[1:5] = rr.min(), rr.max(), np.median(rr), rr.mean()
    out[7] = 60000.0 / rr.mean()
    if rr.size >= 2:
        out[5] = rr.std()
        out[6] = np.sqrt(np.mean(np.diff(rr) ** 2))
        out[8:11] = hra_indices(rr)
    return out


def rps_embed(samples, delay: int = RPS_DELAY) -> PhaseSpace:
    """Two-dimensional delay embedding ``(x_i, x_i+delay)``."""
    x = np.asarray(samples, dtype=float)
    if x.size < delay + 1:
        raise ValueError(f"need at least {delay + 1} samples for the phase space")
    return PhaseSpace(np.column_stack([x[:-delay], x[delay:]]))


def grid_occupancy_and_sfi(ps: PhaseSpace) -> np.ndarray:
    """Normalized 20x20 cell counts over [0, 1]^2 (row-major), then the
    spatial filling index ``sum(p^2) / 400``.

    Rows index the first coordinate, columns the delayed one. The upper edge
    of the last row and column is closed.
    """
    pts = np.asarray(ps.points, dtype=float)
    if pts.shape[0] < 1:
        raise ValueError("empty phase space")
    cells = np.clip(np.floor(pts * GRID).astype(int), 0, GRID - 1)
    counts = np.zeros((GRID, GRID))
    np.add.at(counts, (cells[:, 0], cells[:, 1]), 1.0)
    total = float(pts.shape[0])
    p = counts.ravel() / total
    # integer counts keep the endpoints exact
    sfi = np.sum(counts ** 2) / (total * total * GRID * GRID)
    return np.concatenate([p, [sfi]])


def _runs(sign):
    """Index ranges of maximal runs of equal nonzero sign."""
    runs, start = [], None
    for i, s in enumerate(sign):
        if start is not None and s != sign[start]:
            runs.append((start, i))
            start = None
        if start is None and s != 0:
            start = i
    if start is not None:
        runs.append((start, len(sign)))
    return runs


def poincare_section_features(ps: PhaseSpace) -> np.ndarray:
    """Crossing and excursion statistics against the unity line.

    With ``d_i = y_i - x_i``, a crossing sits between points ``i`` and
    ``i + 1`` when ``d_i`` and ``d_i+1`` have strictly opposite signs; its
    coordinate is the mean of the two points' projections ``(x + y) / 2``
    on the line. An excursion is a maximal run of same-sign nonzero ``d``;
    its amplitude is the run's largest ``|d|``.

    See ``POINCARE_NAMES`` for the order of the 13 outputs.
    """
    pts = np.asarray(ps.points, dtype=float)
    if pts.shape[0] < 2:
        raise ValueError("need at least two phase-space points")
    d = pts[:, 1] - pts[:, 0]
    proj = pts.sum(axis=1) / 2.0
    sign = np.sign(d)
    cross = np.flatnonzero(sign[:-1] * sign[1:] < 0)
    out = np.full(13, np.nan)
    out[0] = cross.size
    out[1] = 1000.0 * cross.size / pts.shape[0]
    if cross.size:
        u = (proj[cross] + proj[cross + 1]) / 2.0
        out[2:6] = u.mean(), u.std(), u.min(), u.max()
        if cross.size >= 2:
            gaps = np.diff(cross)
            out[6:8] = gaps.mean(), gaps.std()
    absd = np.abs(d)
    out[8] = absd.mean()
    out[9] = absd.max()
    out[10] = np.mean(d > 0)
    runs = _runs(sign)
    if runs:
        amps = np.array([absd[a:b].max() for a, b in runs])
        out[11:13] = amps.mean(), amps.std()
    return out


def extract_feature_vector(record: EcgRecord, peaks_pt, peaks_fd) -> np.ndarray:
    """Assemble the 437-feature vector for a baseline-removed record.

    ``peaks_pt`` drive the template SQI and RR features; ``peaks_fd`` is the
    second detector stream for bSQI.
    """
    x, fs = record.samples, record.fs
    tsqi = template_match_sqi(x, fs, peaks_pt)
    quality = [np.nan if tsqi is None else tsqi, bsqi(peaks_pt, peaks_fd, fs)]
    freq = band_power_features(x, fs)
    rr = rr_statistics(_qrs.rr_intervals_ms(peaks_pt, fs))
    ps = rps_embed(normalize_unit(x))
    grid = grid_occupancy_and_sfi(ps)
    section = poincare_section_features(ps)
    vec = np.concatenate([quality, freq, rr, grid, section])
    assert vec.size == N_FEATURES
    return vec


def category_slices():
    """Slice of the feature vector occupied by each category, in order."""
    out, start = {}, 0
    for name, size in CATEGORY_SIZES.items():
        out[name] = slice(start, start + size)
        start += size
    return out


def format_row(values) -> list[str]:
    """Render features for CSV output; NaN becomes an empty field."""
    return ["" if np.isnan(v) else repr(float(v)) for v in values]


def parse_row(fields) -> np.ndarray:
    return np.array([np.nan if f.strip() == "" else float(f) for f in fields])
