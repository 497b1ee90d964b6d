"""Record and label file formats, and a synthetic ECG generator.

A record is a pair of files sharing a stem: a one-line text header
``<id> <fs> <n> <gain>`` (``.hea``) and ``n`` little-endian signed 16-bit
samples (``.dat``). Millivolts are ``raw / gain``.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .signal import EcgRecord

LABELS = ("N", "A", "O", "~")
DEFAULT_GAIN = 1000.0


class RecordFormatError(ValueError):
    pass


def _data_path(header_path: Path) -> Path:
    return header_path.with_suffix(".dat")


def read_header(header_path):
    text = Path(header_path).read_text().split()
    if len(text) != 4:
        raise RecordFormatError(f"malformed header: {header_path}")
    rec_id, fs, n, gain = text
    try:
        fs, n, gain = float(fs), int(n), float(gain)
    except ValueError:
        raise RecordFormatError(f"malformed header: {header_path}") from None
    if not fs > 0:
        raise RecordFormatError(f"bad sampling rate in {header_path}")
    if not gain > 0:
        raise RecordFormatError(f"bad gain in {header_path}")
    if n < 1:
        raise RecordFormatError(f"malformed header: {header_path}")
    return rec_id, fs, n, gain


def read_record(header_path) -> EcgRecord:
    """Load a record from its header file and companion ``.dat`` file."""
    header_path = Path(header_path)
    rec_id, fs, n, gain = read_header(header_path)
    raw = np.fromfile(_data_path(header_path), dtype="<i2")
    if raw.size != n:
        raise RecordFormatError(
            f"length mismatch: header says {n} samples, data has {raw.size}")
    return EcgRecord(id=rec_id, fs=fs, samples=raw.astype(float) / gain)


def write_record(record: EcgRecord, header_path, gain: float = DEFAULT_GAIN) -> Path:
    """Write ``record`` as header + int16 data; returns the header path.

    Samples are quantized to ``round(mV * gain)``; values outside the int16
    range raise.
    """
    if not gain > 0:
        raise RecordFormatError("gain must be positive")
    header_path = Path(header_path)
    raw = np.round(np.asarray(record.samples) * gain)
    if raw.min() < -32768 or raw.max() > 32767:
        raise RecordFormatError("samples exceed int16 range at this gain")
    header_path.parent.mkdir(parents=True, exist_ok=True)
    header_path.write_text(f"{record.id} {record.fs:.17g} {raw.size} {gain:.17g}\n")
    raw.astype("<i2").tofile(_data_path(header_path))
    return header_path


def list_records(directory) -> list[Path]:
    """Header files in ``directory``, sorted by name."""
    return sorted(Path(directory).glob("*.hea"))


def read_labels(path) -> dict[str, str]:
    """Parse ``<record id>,<label>`` lines into an ordered mapping."""
    labels: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise RecordFormatError(f"{path}:{lineno}: expected '<id>,<label>'")
        rec_id, label = parts
        if label not in LABELS:
            raise RecordFormatError(f"{path}:{lineno}: invalid label {label!r}")
        if rec_id in labels:
            raise RecordFormatError(f"{path}:{lineno}: duplicate id {rec_id!r}")
        labels[rec_id] = label
    return labels


def write_labels(labels: dict[str, str], path) -> None:
    with open(path, "w") as fh:
        for rec_id, label in labels.items():
            if label not in LABELS:
                raise RecordFormatError(f"invalid label {label!r}")
            fh.write(f"{rec_id},{label}\n")


def synth_ecg(bpm: float, duration_s: float, fs: float = 300.0, noise_sd: float = 0.0,
              seed=None, wander: bool = False, amplitude: float = 1.0,
              record_id: str = "synth"):
    """Generate a pulse-train ECG surrogate.

    Gaussian R-waves (sigma 15 ms) are placed every ``60 / bpm`` seconds,
    starting half a period in. Optional 0.3 Hz, 0.2 mV baseline wander and
    seeded white noise are added.

    Returns
    -------
    record : EcgRecord
    peaks : array
        Ground-truth R-peak sample indices.
    """
    if not 30 <= bpm <= 300:
        raise ValueError("bpm must lie in [30, 300]")
    if duration_s < 1:
        raise ValueError("duration must be at least 1 s")
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    period = 60.0 / bpm
    beats = np.arange(0.5 * period, n / fs, period)
    sigma = 0.015
    x = np.zeros(n)
    for tb in beats:
        lo = max(int((tb - 5 * sigma) * fs), 0)
        hi = min(int((tb + 5 * sigma) * fs) + 2, n)
        x[lo:hi] += amplitude * np.exp(-0.5 * ((t[lo:hi] - tb) / sigma) ** 2)
    if wander:
        x += 0.2 * np.sin(2 * np.pi * 0.3 * t)
    if noise_sd > 0:
        x += np.random.default_rng(seed).normal(0.0, noise_sd, n)
    peaks = np.round(beats * fs).astype(int)
    peaks = peaks[peaks < n]
    return EcgRecord(id=record_id, fs=fs, samples=x), peaks


def write_peaks(peaks, path) -> None:
    """Sidecar file of ground-truth peak indices, one per line."""
    Path(path).write_text("".join(f"{int(p)}\n" for p in peaks))


def read_peaks(path) -> np.ndarray:
    text = Path(path).read_text().split()
    return np.asarray([int(v) for v in text], dtype=int)


def ensure_dir(path) -> Path:
    os.makedirs(path, exist_ok=True)
    return Path(path)
