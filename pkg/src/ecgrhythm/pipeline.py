"""End-to-end record classification, challenge scoring and data splitting."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import qrs, spectrogram
from .ensemble import ABSTAIN
from .features import extract_feature_vector
from .signal import EcgRecord, remove_baseline, resample_linear
from .spectrogram import SpectroSegment
from .sqi import template_match_sqi

LABELS = ("N", "A", "O", "~")
SCORED = ("N", "A", "O")
MODEL_FS = 300.0


@dataclass
class PipelineConfig:
    sqi_threshold: float = 0.5
    prob_diff_threshold: float = 0.4
    main_seconds: float = 15.0
    secondary_seconds: float = 9.0
    min_peaks: int = 2

    def __post_init__(self):
        if not (0 < self.sqi_threshold < 1 and 0 < self.prob_diff_threshold < 1):
            raise ValueError("thresholds must lie in (0, 1)")
        if self.main_seconds <= 0 or self.secondary_seconds <= 0:
            raise ValueError("segment lengths must be positive")


@dataclass
class Classification:
    label: str
    probabilities: Optional[np.ndarray]
    trace: list = field(default_factory=list)
    sqi: Optional[float] = None


def segment_width(seconds: float, fs: float = MODEL_FS) -> int:
    return int(round(seconds * fs / spectrogram.HOP))


def condition(record: EcgRecord) -> EcgRecord:
    """Resample to 300 Hz if needed and remove baseline wander."""
    x, fs = record.samples, record.fs
    if fs != MODEL_FS:
        x, fs = resample_linear(x, fs, MODEL_FS), MODEL_FS
    return EcgRecord(record.id, fs, remove_baseline(x, fs), record.label)


def record_segments(record: EcgRecord, peaks, seconds: float):
    """QRS-anchored segments of a conditioned record; falls back to a single
    segment from frame 0 when no anchor yields a full window."""
    width = segment_width(seconds, record.fs)
    spec = spectrogram.stft_magnitude(record.samples, record.fs)
    segments = spectrogram.extract_segments(spec, peaks, width)
    if not segments and spec.n_frames >= width:
        segments = [SpectroSegment(spec.magnitudes[:, :width].copy(), 0)]
    return segments


def classify_record(record: EcgRecord, main, secondary, post,
                    cfg: PipelineConfig = PipelineConfig()) -> Classification:
    """Classify one record as N, A, O or ~.

    ``main`` and ``secondary`` need a ``predict(segments)`` method returning
    four class probabilities; ``post`` needs ``predict(features)`` returning
    ``(label, score)`` with label N, O or ``"abstain"``. The returned trace
    names each branch taken.
    """
    if record.duration < cfg.secondary_seconds:
        raise ValueError("below challenge minimum")
    trace = []
    if record.fs != MODEL_FS:
        trace.append("resampled")
    rec = condition(record)
    x, fs = rec.samples, rec.fs
    duration = x.size / fs

    peaks = qrs.detect_pan_tompkins(x, fs)
    peaks_fd = qrs.detect_filtered_derivative(x, fs)
    if peaks.size < cfg.min_peaks:
        trace.append("too_few_peaks")
        return Classification("~", None, trace)

    sqi = template_match_sqi(x, fs, peaks)
    if sqi is None or not sqi > cfg.sqi_threshold:
        trace.append("noise_by_sqi")
        return Classification("~", None, trace, sqi)
    trace.append("sqi_pass")

    if duration >= cfg.main_seconds:
        model, seconds = main, cfg.main_seconds
        trace.append("model:main")
    else:
        model, seconds = secondary, cfg.secondary_seconds
        trace.append("model:secondary")
    segments = record_segments(rec, peaks, seconds)
    probs = np.asarray(model.predict(segments), dtype=float)
    label = LABELS[int(np.argmax(probs))]

    p_n, p_o = probs[LABELS.index("N")], probs[LABELS.index("O")]
    if label in ("N", "O") and abs(p_n - p_o) < cfg.prob_diff_threshold:
        trace.append("postprocess:fired")
        verdict, _ = post.predict(extract_feature_vector(rec, peaks, peaks_fd))
        if verdict == ABSTAIN:
            trace.append("postprocess:abstain")
        else:
            trace.append(f"postprocess:{verdict}")
            label = verdict
    else:
        trace.append("postprocess:skipped")
    return Classification(label, probs, trace, sqi)


def evaluate_f1(predicted, truth):
    """Per-class F1 for N, A and O, and their mean.

    ``~`` is not scored but still counts as a false positive or false
    negative for the other classes. A class absent from both lists has an
    undefined (NaN) F1 and is left out of the mean.
    """
    predicted, truth = list(predicted), list(truth)
    if len(predicted) != len(truth) or not truth:
        raise ValueError("predicted and truth must be non-empty and of equal length")
    p, t = np.asarray(predicted), np.asarray(truth)
    scores = []
    for c in SCORED:
        tp = np.sum((p == c) & (t == c))
        fp = np.sum((p == c) & (t != c))
        fn = np.sum((p != c) & (t == c))
        if tp + fp + fn == 0:
            warnings.warn(f"class {c} absent from predictions and truth; F1 undefined")
            scores.append(np.nan)
        else:
            scores.append(2 * tp / (2 * tp + fp + fn))
    valid = [s for s in scores if not np.isnan(s)]
    mean = float(np.mean(valid)) if valid else np.nan
    return (*[float(s) for s in scores], mean)


def stratified_kfold(labels, k: int = 5, seed: int = 0) -> np.ndarray:
    """Assign each record to one of ``k`` folds, preserving class balance.

    Members of each class are shuffled with ``seed`` and dealt to folds
    round-robin, so per-class fold sizes differ by at most one.
    """
    labels = np.asarray(list(labels))
    if k < 2:
        raise ValueError("k must be at least 2")
    folds = np.empty(labels.size, dtype=int)
    rng = np.random.default_rng(seed)
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        if idx.size < k:
            raise ValueError(f"class {c!r} has {idx.size} members, fewer than k={k}")
        idx = rng.permutation(idx)
        folds[idx] = np.arange(idx.size) % k
    return folds
