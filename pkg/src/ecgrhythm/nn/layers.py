"""Parameterized layers with explicit backward passes."""

from __future__ import annotations

import numpy as np

from . import functional as F


class Layer:
    """Base layer: owns ``params``, matching ``grads``, and ``buffers``."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def children(self):
        return []

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def named(self, kind, prefix=""):
        """Yield ``(qualified name, owning layer, key)`` for params or buffers."""
        for key in getattr(self, kind):
            yield prefix + key, self, key
        for name, child in self.children():
            yield from child.named(kind, f"{prefix}{name}.")

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)
        for _, child in self.children():
            child.zero_grad()

    def _add_param(self, name, value):
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)


class Conv2d(Layer):
    def __init__(self, c_in, c_out, kernel=3, padding=None, stride=1, rng=None):
        super().__init__()
        if kernel % 2 != 1:
            raise ValueError("kernel size must be odd")
        self.stride = stride
        self.padding = kernel // 2 if padding is None else padding
        rng = np.random.default_rng() if rng is None else rng
        fan_in = c_in * kernel * kernel
        self._add_param("weight", rng.normal(0.0, np.sqrt(2.0 / fan_in), (c_out, c_in, kernel, kernel)))
        self._add_param("bias", np.zeros(c_out))

    @property
    def c_out(self):
        return self.params["weight"].shape[0]

    def forward(self, x, train=False):
        self._x = x
        return F.conv2d(x, self.params["weight"], self.params["bias"], self.stride, self.padding)

    def backward(self, grad):
        dx, dw, db = F.conv2d_backward(grad, self._x, self.params["weight"], self.stride, self.padding)
        self.grads["weight"] += dw
        self.grads["bias"] += db
        return dx


class RowBatchNorm(Layer):
    """Batch norm whose statistics and affine terms are per (channel, row)."""

    def __init__(self, channels, rows, momentum=0.9):
        super().__init__()
        self.momentum = momentum
        self._add_param("gamma", np.ones((channels, rows)))
        self._add_param("beta", np.zeros((channels, rows)))
        self.buffers["running_mean"] = np.zeros((channels, rows))
        self.buffers["running_var"] = np.ones((channels, rows))

    def forward(self, x, train=False):
        out, self._cache = F.rowwise_batchnorm(
            x, self.params["gamma"], self.params["beta"], train,
            self.buffers["running_mean"], self.buffers["running_var"], self.momentum)
        return out

    def backward(self, grad):
        dx, dgamma, dbeta = F.rowwise_batchnorm_backward(grad, self._cache)
        self.grads["gamma"] += dgamma
        self.grads["beta"] += dbeta
        return dx


class ReLU(Layer):
    def forward(self, x, train=False):
        self._x = x
        return F.relu(x)

    def backward(self, grad):
        return F.relu_backward(grad, self._x)


class AvgPool2x2(Layer):
    def forward(self, x, train=False):
        self._shape = x.shape
        return F.avg_pool2x2(x)

    def backward(self, grad):
        return F.avg_pool2x2_backward(grad, self._shape)


class GlobalAvgPool(Layer):
    def forward(self, x, train=False):
        self._shape = x.shape
        return F.global_avg_pool(x)

    def backward(self, grad):
        return F.global_avg_pool_backward(grad, self._shape)


class Linear(Layer):
    def __init__(self, n_in, n_out, rng=None):
        super().__init__()
        rng = np.random.default_rng() if rng is None else rng
        self._add_param("weight", rng.normal(0.0, np.sqrt(2.0 / n_in), (n_out, n_in)))
        self._add_param("bias", np.zeros(n_out))

    def forward(self, x, train=False):
        self._x = x
        return F.linear(x, self.params["weight"], self.params["bias"])

    def backward(self, grad):
        dx, dw, db = F.linear_backward(grad, self._x, self.params["weight"])
        self.grads["weight"] += dw
        self.grads["bias"] += db
        return dx


class Sequential(Layer):
    def __init__(self, *named_layers):
        super().__init__()
        self.layers = list(named_layers)

    def children(self):
        return self.layers

    def forward(self, x, train=False):
        for _, layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, grad):
        for _, layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad


def bn_relu_conv(c_in, c_out, rows, kernel, rng):
    return Sequential(("bn", RowBatchNorm(c_in, rows)), ("relu", ReLU()),
                      ("conv", Conv2d(c_in, c_out, kernel, rng=rng)))


class DenseBlock(Layer):
    """``n_layers`` BN-ReLU-Conv(3x3) units with dense concatenation.

    Unit ``i`` sees the channel concatenation of the block input and all
    earlier unit outputs and adds ``growth_rate`` channels. The block emits
    ``c_in + n_layers * growth_rate`` channels.
    """

    def __init__(self, c_in, n_layers, growth_rate, rows, rng=None):
        super().__init__()
        if n_layers < 1:
            raise ValueError("dense block needs at least one layer")
        rng = np.random.default_rng() if rng is None else rng
        self.c_in = c_in
        self.growth_rate = growth_rate
        self.units = [
            (f"layer{i + 1}", bn_relu_conv(c_in + i * growth_rate, growth_rate, rows, 3, rng))
            for i in range(n_layers)
        ]

    @property
    def c_out(self):
        return self.c_in + len(self.units) * self.growth_rate

    def children(self):
        return self.units

    def forward(self, x, train=False):
        if x.shape[1] != self.c_in:
            raise ValueError(f"dense block expects {self.c_in} channels, got {x.shape[1]}")
        features = [x]
        for _, unit in self.units:
            features.append(unit.forward(np.concatenate(features, axis=1), train))
        return np.concatenate(features, axis=1)

    def backward(self, grad):
        k = self.growth_rate
        bounds = [0, self.c_in] + [self.c_in + (i + 1) * k for i in range(len(self.units))]
        chunks = [grad[:, bounds[i]:bounds[i + 1]].copy() for i in range(len(bounds) - 1)]
        for i in range(len(self.units) - 1, -1, -1):
            dinput = self.units[i][1].backward(chunks[i + 1])
            for j in range(i + 1):
                chunks[j] += dinput[:, bounds[j]:bounds[j + 1]]
        return chunks[0]
