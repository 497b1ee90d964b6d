"""Mini-batch SGD with momentum for :class:`~ecgrhythm.nn.model.Model`."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import functional as F
from .model import CLASSES, Model, _stack_segments

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 15
    batch_size: int = 16
    lr: float = 0.05
    momentum: float = 0.9
    lr_decay_epoch: int = 10
    lr_decay: float = 0.1
    seed: int = 0
    max_steps: Optional[int] = None
    warm_start: Optional[Model] = None


@dataclass
class EpochStats:
    epoch: int
    steps: int
    loss: float
    accuracy: float


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)

    @property
    def final_loss(self):
        return self.epochs[-1].loss if self.epochs else float("nan")


def train(model: Model, dataset, config: TrainConfig = TrainConfig()):
    """Fit ``model`` in place on ``(segment, label)`` pairs.

    Labels are class indices into ``("N", "A", "O", "~")`` or the label
    strings themselves. Shuffling is driven by ``config.seed`` so two runs
    from identically built models produce bit-identical results.

    Returns
    -------
    model : Model
        The same object, trained.
    log : TrainLog
        Mean loss and accuracy per epoch.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if config.epochs < 1 or config.batch_size < 1:
        raise ValueError("epochs and batch_size must be positive")
    segments, labels = zip(*dataset)
    x = _stack_checked(segments, model.input_shape)
    y = np.asarray([_label_index(v) for v in labels], dtype=int)

    if config.warm_start is not None:
        model.copy_from(config.warm_start)

    params = [p for _, p in model.parameters()]
    grads = [g for _, g in model.gradients()]
    velocity = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(config.seed)
    log = TrainLog()
    step = 0
    n = x.shape[0]
    for epoch in range(config.epochs):
        lr = config.lr * (config.lr_decay if epoch >= config.lr_decay_epoch else 1.0)
        order = rng.permutation(n)
        losses, correct, seen = [], 0, 0
        for start in range(0, n, config.batch_size):
            if config.max_steps is not None and step >= config.max_steps:
                break
            idx = order[start:start + config.batch_size]
            model.zero_grad()
            logits = model.forward(x[idx], train=True)
            loss, probs, dlogits = F.softmax_cross_entropy(logits, y[idx])
            model.backward(dlogits)
            for p, g, v in zip(params, grads, velocity):
                v *= config.momentum
                v += g
                p -= lr * v
            step += 1
            losses.append(loss * idx.size)
            correct += int((probs.argmax(axis=1) == y[idx]).sum())
            seen += idx.size
        if seen == 0:
            break
        stats = EpochStats(epoch + 1, step, sum(losses) / seen, correct / seen)
        log.epochs.append(stats)
        logger.info("epoch %d: loss %.4f acc %.3f", stats.epoch, stats.loss, stats.accuracy)
    return model, log


def accuracy(model: Model, dataset) -> float:
    """Eval-mode accuracy on ``(segment, label)`` pairs."""
    segments, labels = zip(*dataset)
    y = np.asarray([_label_index(v) for v in labels])
    probs = model.segment_probabilities(list(segments))
    return float((probs.argmax(axis=1) == y).mean())


def _stack_checked(segments, input_shape):
    expected = input_shape[1:]
    for s in segments:
        shape = np.shape(getattr(s, "matrix", s))
        if shape[-2:] != expected:
            raise ValueError(f"segment shape {shape} does not match model input {expected}")
    return _stack_segments(segments, input_shape)


def _label_index(label):
    if isinstance(label, str):
        return CLASSES.index(label)
    label = int(label)
    if not 0 <= label < len(CLASSES):
        raise ValueError(f"label index {label} out of range")
    return label
