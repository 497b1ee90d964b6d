"""DenseNet spectrogram classifier: construction, inference, serialization."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import numpy as np

from . import functional as F
from .layers import (AvgPool2x2, Conv2d, DenseBlock, GlobalAvgPool, Linear, ReLU,
                     RowBatchNorm, Sequential)

CLASSES = ("N", "A", "O", "~")
N_CLASSES = len(CLASSES)

KINDS = {
    "main": {"growth_rate": 6, "input_shape": (1, 20, 375)},
    "secondary": {"growth_rate": 4, "input_shape": (1, 20, 225)},
}

# trainable-parameter totals quoted for the original networks
REFERENCE_PARAMETER_COUNTS = {"main": 262_344, "secondary": 119_458}

_MAGIC = "ecgrhythm-densenet/1"


class Model:
    """Three-block DenseNet with row-wise batch normalization.

    Layout: 3x3 stem conv (1 -> 2k channels), then three dense blocks of
    ``layers_per_block`` units separated by transitions (row-wise BN, ReLU,
    1x1 conv halving the channels, 2x2 average pooling), then BN, ReLU,
    global average pooling and an affine map to four logits.
    """

    def __init__(self, kind="main", growth_rate=None, layers_per_block=12,
                 input_shape=None, seed=0):
        if kind not in KINDS:
            raise ValueError(f"unknown model kind {kind!r}")
        self.kind = kind
        self.growth_rate = int(growth_rate or KINDS[kind]["growth_rate"])
        self.layers_per_block = int(layers_per_block)
        self.input_shape = tuple(int(v) for v in (input_shape or KINDS[kind]["input_shape"]))
        self.seed = int(seed)
        c0, rows, cols = self.input_shape
        if rows // 4 < 1 or cols // 4 < 1:
            raise ValueError("input too small for two 2x2 poolings")

        rng = np.random.default_rng(self.seed)
        k, L = self.growth_rate, self.layers_per_block
        layers = [("stem", Conv2d(c0, 2 * k, 3, rng=rng))]
        channels = 2 * k
        for b in range(1, 4):
            block = DenseBlock(channels, L, k, rows, rng=rng)
            layers.append((f"block{b}", block))
            channels = block.c_out
            if b < 3:
                reduced = channels // 2
                layers.append((f"transition{b}", Sequential(
                    ("bn", RowBatchNorm(channels, rows)),
                    ("relu", ReLU()),
                    ("conv", Conv2d(channels, reduced, 1, rng=rng)),
                    ("pool", AvgPool2x2()),
                )))
                channels, rows = reduced, rows // 2
        layers += [
            ("final_bn", RowBatchNorm(channels, rows)),
            ("final_relu", ReLU()),
            ("pool", GlobalAvgPool()),
            ("classifier", Linear(channels, N_CLASSES, rng=rng)),
        ]
        self.net = Sequential(*layers)

    # -- structure -------------------------------------------------------
    def parameters(self):
        return [(name, layer.params[key]) for name, layer, key in self.net.named("params")]

    def gradients(self):
        return [(name, layer.grads[key]) for name, layer, key in self.net.named("params")]

    def buffers(self):
        return [(name, layer.buffers[key]) for name, layer, key in self.net.named("buffers")]

    def parameter_count(self) -> int:
        return int(sum(p.size for _, p in self.parameters()))

    def depth(self) -> int:
        """Number of weight layers (convolutions plus the classifier)."""
        count = 0
        stack = [self.net]
        while stack:
            layer = stack.pop()
            if isinstance(layer, (Conv2d, Linear)):
                count += 1
            stack.extend(child for _, child in layer.children())
        return count

    # -- computation -----------------------------------------------------
    def forward(self, x, train=False):
        x = np.asarray(x, dtype=float)
        if x.ndim != 4 or x.shape[1:] != self.input_shape:
            raise ValueError(f"expected input (batch, {', '.join(map(str, self.input_shape))}), "
                             f"got {x.shape}")
        return self.net.forward(x, train)

    def backward(self, grad_logits):
        return self.net.backward(grad_logits)

    def zero_grad(self):
        self.net.zero_grad()

    def segment_probabilities(self, segments, batch_size=32):
        """Eval-mode softmax for each segment; returns (n_segments, 4)."""
        x = _stack_segments(segments, self.input_shape)
        out = [F.softmax(self.forward(x[i:i + batch_size], train=False))
               for i in range(0, x.shape[0], batch_size)]
        return np.concatenate(out, axis=0)

    def predict(self, segments):
        """Record-level class probabilities: the mean of per-segment softmax."""
        if len(segments) == 0:
            raise ValueError("no segments to classify")
        return self.segment_probabilities(segments).mean(axis=0)

    # -- state -----------------------------------------------------------
    def state(self):
        return self.parameters() + self.buffers()

    def copy_from(self, donor: "Model"):
        """Copy every parameter and running statistic from a compatible model."""
        mine, theirs = self.state(), donor.state()
        if [(n, a.shape) for n, a in mine] != [(n, a.shape) for n, a in theirs]:
            raise ValueError("warm-start donor has an incompatible architecture")
        for (_, dst), (_, src) in zip(mine, theirs):
            dst[...] = src

    def clone(self) -> "Model":
        return copy.deepcopy(self)

    def config(self):
        return {"kind": self.kind, "growth_rate": self.growth_rate,
                "layers_per_block": self.layers_per_block,
                "input_shape": list(self.input_shape), "seed": self.seed}

    def save(self, path):
        """Write a JSON header line followed by little-endian float64 tensors."""
        state = self.state()
        header = dict(self.config(), format=_MAGIC,
                      tensors=[[name, list(arr.shape)] for name, arr in state])
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n")
            for _, arr in state:
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "Model":
        raw = Path(path).read_bytes()
        newline = raw.index(b"\n")
        header = json.loads(raw[:newline])
        if header.get("format") != _MAGIC:
            raise ValueError(f"{path}: not a model file")
        model = cls(header["kind"], header["growth_rate"], header["layers_per_block"],
                    header["input_shape"], header["seed"])
        state = model.state()
        if [[n, list(a.shape)] for n, a in state] != header["tensors"]:
            raise ValueError(f"{path}: tensor layout does not match the header")
        payload = np.frombuffer(raw[newline + 1:], dtype="<f8")
        if payload.size != sum(a.size for _, a in state):
            raise ValueError(f"{path}: truncated or oversized payload")
        offset = 0
        for _, arr in state:
            arr[...] = payload[offset:offset + arr.size].reshape(arr.shape)
            offset += arr.size
        return model


def build_model(kind="main", seed=0, layers_per_block=12, growth_rate=None,
                input_shape=None) -> Model:
    """Construct a ``main`` (k=6, 20x375) or ``secondary`` (k=4, 20x225) model.

    ``layers_per_block``, ``growth_rate`` and ``input_shape`` may be
    overridden to build reduced networks for testing.
    """
    return Model(kind, growth_rate, layers_per_block, input_shape, seed)


def _stack_segments(segments, input_shape):
    mats = [getattr(s, "matrix", s) for s in segments]
    x = np.stack([np.asarray(m, dtype=float).reshape(input_shape) for m in mats])
    return x


def predict(model, segments):
    """Mean per-segment softmax of ``model`` over ``segments``."""
    return model.predict(segments)
