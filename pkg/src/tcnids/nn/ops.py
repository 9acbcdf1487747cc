"""Layer primitives with hand-derived backward passes.

Every ``*_forward`` returns ``(output, cache)``; the matching ``*_backward``
consumes that cache. Sequence tensors are batch-first ``(B, T, C)``; an
unbatched ``(T, C)`` input is accepted and the batch axis is dropped again on
the way out.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ArgumentError, DimensionError, LabelError
from ..numerics import Rng

TRAIN = "train"
INFERENCE = "inference"
MODES = (TRAIN, INFERENCE)


def _check_mode(mode):
    if mode not in MODES:
        raise ArgumentError(f"mode must be one of {MODES}, got {mode!r}")


# -- causal convolution -----------------------------------------------------

@dataclass
class ConvCache:
    x: np.ndarray
    kernel: np.ndarray
    dilation: int
    squeeze: bool


def conv1d_causal_forward(x, kernel, bias, dilation: int):
    """Dilated causal convolution, output length equal to input length.

    ``y[t, o] = bias[o] + sum_j sum_c kernel[j, c, o] * x[t - (k-1-j)*dilation, c]``
    with zeros read for negative time indices.
    """
    if dilation < 1:
        raise ArgumentError(f"dilation must be >= 1, got {dilation}")
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if x.ndim != 3:
        raise DimensionError(f"conv input must be (T, C) or (B, T, C), got {x.shape}")
    kernel = np.asarray(kernel, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if kernel.ndim != 3 or kernel.shape[0] < 1:
        raise DimensionError(f"kernel must be (k, Cin, Cout), got {kernel.shape}")
    if kernel.shape[1] != x.shape[2]:
        raise DimensionError(
            f"channel mismatch: input {x.shape} has {x.shape[2]} channels, "
            f"kernel {kernel.shape} expects {kernel.shape[1]}")
    if bias.shape != (kernel.shape[2],):
        raise DimensionError(f"bias shape {bias.shape} does not match kernel {kernel.shape}")
    y = kernels.causal_conv_forward(x, kernel, bias, dilation)
    cache = ConvCache(np.ascontiguousarray(x), kernel, dilation, squeeze)
    return (y[0] if squeeze else y), cache


def conv1d_causal_backward(cache: ConvCache, grad_out):
    """Returns ``(grad_x, grad_kernel, grad_bias)``."""
    g = np.asarray(grad_out, dtype=np.float64)
    if cache.squeeze:
        g = g[None]
    expected = cache.x.shape[:2] + (cache.kernel.shape[2],)
    if g.shape != expected:
        raise DimensionError(f"grad_out shape {g.shape} does not match forward output {expected}")
    gx, gk, gb = kernels.causal_conv_backward(cache.x, cache.kernel, g, cache.dilation)
    return (gx[0] if cache.squeeze else gx), gk, gb


# -- pointwise --------------------------------------------------------------

def relu_forward(x):
    x = np.asarray(x, dtype=np.float64)
    active = x > 0
    return np.maximum(x, 0.0), active


def relu_backward(active, grad_out):
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != active.shape:
        raise DimensionError(f"grad_out shape {grad_out.shape} != input shape {active.shape}")
    return np.where(active, grad_out, 0.0)


def dropout_forward(x, rate: float, rng: Rng | None, mode: str):
    """Inverted dropout. Returns ``(y, mask)`` with mask entries in ``{0, 1/(1-rate)}``."""
    if not 0.0 <= rate < 1.0:
        raise ArgumentError(f"dropout rate must be in [0, 1), got {rate}")
    _check_mode(mode)
    x = np.asarray(x, dtype=np.float64)
    if mode == INFERENCE or rate == 0.0:
        return x.copy(), np.ones_like(x)
    if rng is None:
        raise ArgumentError("train-mode dropout needs an Rng")
    keep = rng.random(x.shape) >= rate
    mask = keep / (1.0 - rate)
    return x * mask, mask


def dropout_backward(mask, grad_out):
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != mask.shape:
        raise DimensionError(f"grad_out shape {grad_out.shape} != mask shape {mask.shape}")
    return grad_out * mask


# -- dense / flatten --------------------------------------------------------

def dense_forward(x, weight, bias):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"dense input {x.shape} incompatible with weight {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise DimensionError(f"dense bias {bias.shape} incompatible with weight {weight.shape}")
    return x @ weight + bias, (x, weight)


def dense_backward(cache, grad_out):
    """Returns ``(grad_x, grad_weight, grad_bias)``."""
    x, weight = cache
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != x.shape[:-1] + (weight.shape[1],):
        raise DimensionError(f"grad_out shape {grad_out.shape} does not match dense output")
    if x.ndim == 1:
        return weight @ grad_out, np.outer(x, grad_out), grad_out.copy()
    return grad_out @ weight.T, x.T @ grad_out, grad_out.sum(axis=0)


def flatten(x):
    """Row-major ``(T, C) -> (T*C,)``, or ``(B, T, C) -> (B, T*C)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x.reshape(-1), x.shape
    return x.reshape(x.shape[0], -1), x.shape


def unflatten(flat, shape):
    return np.asarray(flat).reshape(shape)


# -- softmax cross-entropy --------------------------------------------------

def _check_labels(labels, num_classes):
    labels = np.asarray(labels)
    if labels.ndim != 1 or not np.issubdtype(labels.dtype, np.integer):
        raise LabelError("labels must be a 1-D integer array")
    bad = np.flatnonzero((labels < 0) | (labels >= num_classes))
    if bad.size:
        i = int(bad[0])
        raise LabelError(
            f"label {int(labels[i])} at index {i} is outside [0, {num_classes})", index=i)
    return labels


def softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent_forward(logits, labels):
    """Mean sparse categorical cross-entropy. Returns ``(loss, probs)``."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise DimensionError(f"logits must be (B, K), got {logits.shape}")
    labels = _check_labels(labels, logits.shape[1])
    if labels.shape[0] != logits.shape[0]:
        raise DimensionError(f"{labels.shape[0]} labels for {logits.shape[0]} rows")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted[np.arange(len(labels)), labels] - log_norm
    probs = np.exp(shifted - log_norm[:, None])
    return float(-log_p.mean()), probs


def softmax_xent_backward(probs, labels):
    probs = np.asarray(probs, dtype=np.float64)
    labels = _check_labels(labels, probs.shape[1])
    grad = probs.copy()
    grad[np.arange(len(labels)), labels] -= 1.0
    return grad / len(labels)


# -- residual block ---------------------------------------------------------

@dataclass
class ResidualCache:
    conv1: ConvCache
    relu1: np.ndarray
    drop1: np.ndarray
    conv2: ConvCache
    relu2: np.ndarray
    drop2: np.ndarray
    proj: ConvCache | None
    out_active: np.ndarray
    squeeze: bool


def residual_block_forward(x, params, dilation, dropout_rate, rng, mode):
    """``relu(branch(x) + skip(x))``.

    ``branch`` is conv, relu, dropout, conv, relu, dropout at ``dilation``;
    ``skip`` is the identity, or a 1x1 convolution when ``params`` holds
    ``proj.kernel``/``proj.bias``.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    h, c1 = conv1d_causal_forward(x, params["conv1.kernel"], params["conv1.bias"], dilation)
    h, r1 = relu_forward(h)
    h, d1 = dropout_forward(h, dropout_rate, rng, mode)
    h, c2 = conv1d_causal_forward(h, params["conv2.kernel"], params["conv2.bias"], dilation)
    h, r2 = relu_forward(h)
    h, d2 = dropout_forward(h, dropout_rate, rng, mode)
    if "proj.kernel" in params:
        skip, cp = conv1d_causal_forward(x, params["proj.kernel"], params["proj.bias"], 1)
    else:
        if x.shape[2] != h.shape[2]:
            raise DimensionError(
                f"identity skip needs equal channels, got {x.shape[2]} -> {h.shape[2]}")
        skip, cp = x, None
    y, active = relu_forward(h + skip)
    cache = ResidualCache(c1, r1, d1, c2, r2, d2, cp, active, squeeze)
    return (y[0] if squeeze else y), cache


def residual_block_backward(cache: ResidualCache, grad_out):
    """Returns ``(grad_x, grads)`` with ``grads`` keyed like the block params."""
    g = np.asarray(grad_out, dtype=np.float64)
    if cache.squeeze:
        g = g[None]
    g = relu_backward(cache.out_active, g)
    grads = {}
    if cache.proj is not None:
        gx_skip, grads["proj.kernel"], grads["proj.bias"] = conv1d_causal_backward(cache.proj, g)
    else:
        gx_skip = g
    h = dropout_backward(cache.drop2, g)
    h = relu_backward(cache.relu2, h)
    h, grads["conv2.kernel"], grads["conv2.bias"] = conv1d_causal_backward(cache.conv2, h)
    h = dropout_backward(cache.drop1, h)
    h = relu_backward(cache.relu1, h)
    h, grads["conv1.kernel"], grads["conv1.bias"] = conv1d_causal_backward(cache.conv1, h)
    gx = h + gx_skip
    return (gx[0] if cache.squeeze else gx), grads
