"""Command-line interface.

Results go to stdout, diagnostics to stderr. Exit status is 0 on success,
1 on a usage error and 2 on a data error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import io, qrs
from .ensemble import AbstainModel, roc_auc, train_adaboost_abstain
from .features import FEATURE_NAMES, extract_feature_vector, format_row, parse_row
from .nn import Model, TrainConfig, build_model, train
from .pipeline import (PipelineConfig, classify_record, condition, evaluate_f1,
                       record_segments, stratified_kfold)
from .signal import remove_baseline
from .spectrogram import MAIN_WIDTH, SECONDARY_WIDTH, write_segment_csv

log = logging.getLogger("ecgrhythm")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _records(path) -> list[Path]:
    path = Path(path)
    if path.is_dir():
        found = io.list_records(path)
        if not found:
            raise DataError(f"no .hea records in {path}")
        return found
    if path.suffix != ".hea":
        path = path.with_suffix(".hea")
    if not path.exists():
        raise DataError(f"no such record: {path}")
    return [path]


def _load(path):
    try:
        return io.read_record(path)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc


def _detect(record):
    x = remove_baseline(record.samples, record.fs)
    return x, qrs.detect_pan_tompkins(x, record.fs), qrs.detect_filtered_derivative(x, record.fs)


def cmd_qrs(args):
    rec = _load(_records(args.record)[0])
    x = remove_baseline(rec.samples, rec.fs)
    detector = qrs.detect_pan_tompkins if args.detector == "pt" else qrs.detect_filtered_derivative
    for p in detector(x, rec.fs):
        print(int(p))


def cmd_sqi(args):
    from .sqi import bsqi, template_match_sqi
    print("id,template_sqi,bsqi")
    for path in _records(args.record):
        rec = _load(path)
        x, pt, fd = _detect(rec)
        t = template_match_sqi(x, rec.fs, pt)
        print(f"{rec.id},{'' if t is None else f'{t:.6f}'},{bsqi(pt, fd, rec.fs):.6f}")


def cmd_spectrogram(args):
    rec = condition(_load(_records(args.record)[0]))
    peaks = qrs.detect_pan_tompkins(rec.samples, rec.fs)
    seconds = 15.0 if args.width == MAIN_WIDTH else 9.0
    out = io.ensure_dir(args.out)
    segments = record_segments(rec, peaks, seconds)
    for i, seg in enumerate(segments):
        write_segment_csv(seg, out / f"{rec.id}_seg{i:03d}_peak{seg.anchor_peak}.csv")
    print(len(segments))


def _feature_row(path):
    rec = condition(_load(path))
    pt = qrs.detect_pan_tompkins(rec.samples, rec.fs)
    fd = qrs.detect_filtered_derivative(rec.samples, rec.fs)
    return rec.id, extract_feature_vector(rec, pt, fd)


def cmd_features(args):
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(("id",) + FEATURE_NAMES)
    for target in args.records:
        for path in _records(target):
            rec_id, vec = _feature_row(path)
            writer.writerow([rec_id] + format_row(vec))


def _read_feature_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0][1:]) != FEATURE_NAMES:
        raise DataError(f"{path}: header does not match the feature registry")
    ids = [r[0] for r in rows[1:]]
    X = np.array([parse_row(r[1:]) for r in rows[1:]]).reshape(len(ids), len(FEATURE_NAMES))
    return ids, X


def cmd_train_cnn(args):
    labels = io.read_labels(args.labels)
    kind = args.kind
    seconds = 15.0 if kind == "main" else 9.0
    dataset = []
    for rec_id, label in labels.items():
        path = Path(args.directory) / f"{rec_id}.hea"
        if not path.exists():
            raise DataError(f"labelled record {rec_id} not found in {args.directory}")
        rec = condition(_load(path))
        if rec.duration < seconds:
            log.warning("skipping %s: shorter than %g s", rec_id, seconds)
            continue
        peaks = qrs.detect_pan_tompkins(rec.samples, rec.fs)
        segs = record_segments(rec, peaks, seconds)[:args.max_segments]
        dataset += [(s, label) for s in segs]
    if not dataset:
        raise DataError("no training segments")
    model = build_model(kind, seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                      seed=args.seed,
                      warm_start=Model.load(args.warm_start) if args.warm_start else None)
    model, history = train(model, dataset, cfg)
    model.save(args.out)
    for e in history.epochs:
        print(f"{e.epoch},{e.loss:.6f},{e.accuracy:.4f}")


def cmd_train_post(args):
    ids, X = _read_feature_csv(args.features)
    labels = io.read_labels(args.labels)
    keep = [i for i, rec_id in enumerate(ids) if labels.get(rec_id) in ("N", "O")]
    if not keep:
        raise DataError("no N or O records among the features")
    y = [labels[ids[i]] for i in keep]
    try:
        model = train_adaboost_abstain(X[keep], y, rounds=args.rounds, seed=args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    model.save(args.out)
    print(f"stumps={len(model.stumps)} features={len(model.selected_features)} "
          f"train_auc={roc_auc(model, X[keep], y):.4f}")


def cmd_classify(args):
    main, secondary = Model.load(args.main), Model.load(args.secondary)
    post = AbstainModel.load(args.post)
    failed = False
    for path in _records(args.record):
        try:
            rec = io.read_record(path)
            result = classify_record(rec, main, secondary, post, PipelineConfig())
        except (OSError, ValueError) as exc:
            print(f"{path.stem}: {exc}", file=sys.stderr)
            failed = True
            continue
        print(f"{rec.id},{result.label}")
    if failed:
        raise DataError("some records could not be classified")


def cmd_score(args):
    pred, truth = io.read_labels(args.predicted), io.read_labels(args.truth)
    if set(pred) != set(truth):
        raise DataError("predicted and truth files cover different record ids")
    ids = list(truth)
    f1n, f1a, f1o, mean = evaluate_f1([pred[i] for i in ids], [truth[i] for i in ids])
    print(",".join("" if np.isnan(v) else f"{v:.3f}" for v in (f1n, f1a, f1o, mean)))


def cmd_split(args):
    labels = io.read_labels(args.truth)
    try:
        folds = stratified_kfold(list(labels.values()), args.k, args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    for rec_id, fold in zip(labels, folds):
        print(f"{rec_id},{fold}")


def cmd_synth(args):
    rec, peaks = io.synth_ecg(args.bpm, args.seconds, args.fs, args.noise, args.seed,
                              wander=args.wander, amplitude=args.amplitude)
    out = Path(args.out)
    header = out if out.suffix == ".hea" else out.with_suffix(".hea")
    rec.id = header.stem
    io.write_record(rec, header, gain=args.gain)
    io.write_peaks(peaks, header.with_suffix(".peaks"))
    print(header)


def build_parser():
    p = _Parser(prog="ecgrhythm", description="Single-lead ECG rhythm classification.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("qrs", help="print R-peak indices")
    s.add_argument("record")
    s.add_argument("--detector", choices=("pt", "fd"), default="pt")
    s.set_defaults(func=cmd_qrs)

    s = sub.add_parser("sqi", help="print template SQI and bSQI")
    s.add_argument("record")
    s.set_defaults(func=cmd_sqi)

    s = sub.add_parser("spectrogram", help="dump QRS-anchored spectrogram segments")
    s.add_argument("record")
    s.add_argument("--out", required=True)
    s.add_argument("--width", type=int, choices=(MAIN_WIDTH, SECONDARY_WIDTH), default=MAIN_WIDTH)
    s.set_defaults(func=cmd_spectrogram)

    s = sub.add_parser("features", help="print the 437-feature rows as CSV")
    s.add_argument("records", nargs="+")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("train-cnn", help="train a DenseNet model")
    s.add_argument("labels")
    s.add_argument("directory")
    s.add_argument("--kind", choices=("main", "secondary"), default="main")
    s.add_argument("--epochs", type=int, default=15)
    s.add_argument("--batch-size", type=int, default=16)
    s.add_argument("--lr", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-segments", type=int, default=None,
                   help="cap on segments taken per record")
    s.add_argument("--warm-start")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_cnn)

    s = sub.add_parser("train-post", help="train the AdaBoost-abstain post-classifier")
    s.add_argument("features")
    s.add_argument("--labels", required=True)
    s.add_argument("--rounds", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_post)

    s = sub.add_parser("classify", help="classify a record or a directory of records")
    s.add_argument("record")
    s.add_argument("--main", required=True)
    s.add_argument("--secondary", required=True)
    s.add_argument("--post", required=True)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("score", help="challenge F1 scores")
    s.add_argument("predicted")
    s.add_argument("truth")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("split", help="stratified k-fold assignment")
    s.add_argument("truth")
    s.add_argument("--k", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("synth", help="write a synthetic ECG record")
    s.add_argument("--bpm", type=float, default=75.0)
    s.add_argument("--seconds", type=float, default=30.0)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--fs", type=float, default=300.0)
    s.add_argument("--amplitude", type=float, default=1.0)
    s.add_argument("--wander", action="store_true")
    s.add_argument("--gain", type=float, default=io.DEFAULT_GAIN)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
