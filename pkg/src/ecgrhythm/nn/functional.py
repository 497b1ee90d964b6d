"""Stateless forward/backward kernels on NCHW float64 arrays."""

from __future__ import annotations

import numpy as np

BN_EPS = 1e-5


def _conv_out(size, k, stride, padding):
    return (size + 2 * padding - k) // stride + 1


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """2-D cross-correlation.

    Parameters
    ----------
    x : array, shape (B, C, H, W)
    weight : array, shape (O, C, kh, kw)
    bias : array, shape (O,), optional
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError("conv2d expects rank-4 input and weight")
    B, C, H, W = x.shape
    O, C2, kh, kw = weight.shape
    if C != C2:
        raise ValueError(f"channel mismatch: input has {C}, weight expects {C2}")
    if bias is not None and bias.shape != (O,):
        raise ValueError("bias shape mismatch")
    Ho, Wo = _conv_out(H, kh, stride, padding), _conv_out(W, kw, stride, padding)
    if Ho < 1 or Wo < 1:
        raise ValueError("kernel larger than padded input")
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out = np.zeros((O, B, Ho, Wo))
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i:i + stride * (Ho - 1) + 1:stride, j:j + stride * (Wo - 1) + 1:stride]
            out += np.tensordot(weight[:, :, i, j], patch, axes=([1], [1]))
    out = out.transpose(1, 0, 2, 3)
    if bias is not None:
        out = out + bias[None, :, None, None]
    return np.ascontiguousarray(out)


def conv2d_backward(grad, x, weight, stride=1, padding=0):
    """Gradients of :func:`conv2d` w.r.t. input, weight and bias."""
    B, C, H, W = x.shape
    O, _, kh, kw = weight.shape
    _, _, Ho, Wo = grad.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    dxp = np.zeros((C, B) + xp.shape[2:])
    dw = np.zeros_like(weight)
    for i in range(kh):
        for j in range(kw):
            rows = slice(i, i + stride * (Ho - 1) + 1, stride)
            cols = slice(j, j + stride * (Wo - 1) + 1, stride)
            dw[:, :, i, j] = np.tensordot(grad, xp[:, :, rows, cols], axes=([0, 2, 3], [0, 2, 3]))
            dxp[:, :, rows, cols] += np.tensordot(weight[:, :, i, j], grad, axes=([0], [1]))
    dx = dxp[:, :, padding:padding + H, padding:padding + W].transpose(1, 0, 2, 3)
    return np.ascontiguousarray(dx), dw, grad.sum(axis=(0, 2, 3))


def rowwise_batchnorm(x, gamma, beta, train, running_mean, running_var, momentum=0.9,
                      eps=BN_EPS):
    """Batch normalization with statistics per (channel, row).

    Mean and variance are taken over the batch and column axes, so every
    frequency row of every channel is normalized on its own. In train mode
    the running statistics are updated in place with
    ``r <- momentum * r + (1 - momentum) * batch``; in eval mode they are
    used as-is.

    Returns the output and a cache for :func:`rowwise_batchnorm_backward`.
    """
    if x.ndim != 4:
        raise ValueError("rowwise_batchnorm expects rank-4 input")
    if train:
        mean = x.mean(axis=(0, 3))
        var = x.var(axis=(0, 3))
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, :, None]) * inv_std[None, :, :, None]
    out = gamma[None, :, :, None] * xhat + beta[None, :, :, None]
    return out, (xhat, inv_std, gamma, train)


def rowwise_batchnorm_backward(grad, cache):
    xhat, inv_std, gamma, train = cache
    dgamma = (grad * xhat).sum(axis=(0, 3))
    dbeta = grad.sum(axis=(0, 3))
    dxhat = grad * gamma[None, :, :, None]
    if not train:
        return dxhat * inv_std[None, :, :, None], dgamma, dbeta
    n = xhat.shape[0] * xhat.shape[3]
    sum_d = dxhat.sum(axis=(0, 3), keepdims=True)
    sum_dx = (dxhat * xhat).sum(axis=(0, 3), keepdims=True)
    dx = (inv_std[None, :, :, None] / n) * (n * dxhat - sum_d - xhat * sum_dx)
    return dx, dgamma, dbeta


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(grad, x):
    return grad * (x > 0)


def avg_pool2x2(x):
    """2x2 average pooling with stride 2; odd trailing rows/columns are dropped."""
    B, C, H, W = x.shape
    H2, W2 = H // 2, W // 2
    return x[:, :, :2 * H2, :2 * W2].reshape(B, C, H2, 2, W2, 2).mean(axis=(3, 5))


def avg_pool2x2_backward(grad, input_shape):
    B, C, H, W = input_shape
    H2, W2 = grad.shape[2:]
    dx = np.zeros(input_shape)
    spread = np.repeat(np.repeat(grad, 2, axis=2), 2, axis=3) * 0.25
    dx[:, :, :2 * H2, :2 * W2] = spread
    return dx


def global_avg_pool(x):
    return x.mean(axis=(2, 3))


def global_avg_pool_backward(grad, input_shape):
    B, C, H, W = input_shape
    return np.broadcast_to(grad[:, :, None, None] / (H * W), input_shape).copy()


def linear(x, weight, bias):
    """Affine map ``x @ weight.T + bias`` with weight of shape (out, in)."""
    return x @ weight.T + bias


def linear_backward(grad, x, weight):
    return grad @ weight, grad.T @ x, grad.sum(axis=0)


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean softmax cross-entropy.

    Returns
    -------
    loss : float
    probs : array, shape (B, K)
    grad : array, shape (B, K)
        Gradient of the mean loss w.r.t. ``logits``.
    """
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels, dtype=int)
    b, k = logits.shape
    if labels.shape != (b,) or labels.min() < 0 or labels.max() >= k:
        raise ValueError("labels must be class indices in [0, K)")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    log_probs = z - log_norm[:, None]
    loss = -log_probs[np.arange(b), labels].mean()
    probs = np.exp(log_probs)
    grad = probs.copy()
    grad[np.arange(b), labels] -= 1.0
    return float(loss), probs, grad / b
