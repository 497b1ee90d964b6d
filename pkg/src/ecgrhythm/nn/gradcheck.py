"""Central finite-difference verification of analytic gradients.

Errors are reported per tensor as ``|a - n| / max(|a| + |n|, 1e-6)`` in the
Euclidean norm, with ``a`` the analytic and ``n`` the numerical gradient.
The floor keeps tensors whose true gradient vanishes (a conv bias feeding a
train-mode batch norm) from turning round-off into a 100% error.

Entries whose +-h stencil moves any ReLU input across zero are excluded:
the loss is not differentiable across the stencil there, so the finite
difference is not a valid oracle. Each check reports how many entries were
skipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import functional as F
from .layers import Layer, ReLU
from .model import Model

STEP = 1e-5
NORM_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    errors: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def n_skipped(self) -> int:
        return int(sum(self.skipped.values()))


def _relu_layers(root):
    found, stack = [], [root]
    while stack:
        layer = stack.pop()
        if isinstance(layer, ReLU):
            found.append(layer)
        stack.extend(child for _, child in layer.children())
    return found


def _sign_probe(relus):
    if not relus:
        return None
    return lambda: [r._x > 0 for r in relus]


def numerical_gradient(f, array, h=STEP, probe=None):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``array``.

    ``array`` is perturbed in place and restored afterwards. When ``probe``
    is given it is called after each evaluation; entries for which it
    returns different boolean masks at ``+h`` and ``-h`` are set to NaN.
    """
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        sp = probe() if probe else None
        flat[i] = orig - h
        fm = f()
        sm = probe() if probe else None
        flat[i] = orig
        if probe and any(not np.array_equal(a, b) for a, b in zip(sp, sm)):
            gflat[i] = np.nan
        else:
            gflat[i] = (fp - fm) / (2 * h)
    return grad


def relative_error(analytic, numeric):
    """Norm-wise relative error, ignoring NaN entries of ``numeric``."""
    a = np.asarray(analytic, dtype=float).ravel()
    n = np.asarray(numeric, dtype=float).ravel()
    keep = ~np.isnan(n)
    a, n = a[keep], n[keep]
    denom = max(np.linalg.norm(a) + np.linalg.norm(n), NORM_FLOOR)
    return float(np.linalg.norm(a - n) / denom)


def _compare(report, name, analytic, numeric):
    report.errors[name] = relative_error(analytic, numeric)
    report.skipped[name] = int(np.isnan(numeric).sum())


def check_layer(layer: Layer, x, seed=0, train=True, h=STEP) -> GradCheckReport:
    """Check input and parameter gradients of ``layer`` under a seeded
    random linear loss ``sum(out * R)``."""
    x = np.array(x, dtype=float)
    proj = np.random.default_rng(seed).normal(size=layer.forward(x, train).shape)
    probe = _sign_probe(_relu_layers(layer))

    def loss():
        return float(np.sum(layer.forward(x, train) * proj))

    layer.zero_grad()
    layer.forward(x, train)
    dx = layer.backward(proj)
    analytic = {name: lyr.grads[key].copy() for name, lyr, key in layer.named("params")}

    report = GradCheckReport()
    _compare(report, "input", dx, numerical_gradient(loss, x, h, probe))
    for name, lyr, key in layer.named("params"):
        _compare(report, name, analytic[name], numerical_gradient(loss, lyr.params[key], h, probe))
    return report


def check_model(model: Model, x, labels, train=True, h=STEP) -> GradCheckReport:
    """Check the input and every parameter of ``model`` against softmax
    cross-entropy."""
    x = np.array(x, dtype=float)
    labels = np.asarray(labels)
    probe = _sign_probe(_relu_layers(model.net))

    def loss():
        return F.softmax_cross_entropy(model.forward(x, train), labels)[0]

    model.zero_grad()
    _, _, dlogits = F.softmax_cross_entropy(model.forward(x, train), labels)
    dx = model.backward(dlogits)
    analytic = {name: g.copy() for name, g in model.gradients()}

    report = GradCheckReport()
    _compare(report, "input", dx, numerical_gradient(loss, x, h, probe))
    for name, p in model.parameters():
        _compare(report, name, analytic[name], numerical_gradient(loss, p, h, probe))
    return report


def check_softmax_cross_entropy(batch=3, classes=4, seed=0, h=STEP) -> float:
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(batch, classes))
    labels = rng.integers(0, classes, batch)
    _, _, grad = F.softmax_cross_entropy(logits, labels)
    numeric = numerical_gradient(lambda: F.softmax_cross_entropy(logits, labels)[0], logits, h)
    return relative_error(grad, numeric)


def gradient_check(target, input_shape, seed=0, train=True) -> float:
    """Maximum relative gradient error of a layer or model on random input.

    ``input_shape`` includes the batch axis. A :class:`Model` is checked
    with softmax cross-entropy against seeded random labels, a layer with a
    seeded random linear functional of its output.
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(size=input_shape)
    if isinstance(target, Model):
        labels = rng.integers(0, 4, input_shape[0])
        return check_model(target, x, labels, train).max_error
    return check_layer(target, x, seed, train).max_error
