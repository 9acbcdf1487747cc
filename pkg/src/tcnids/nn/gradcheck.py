"""Central finite-difference oracles for the hand-written backward passes."""
from __future__ import annotations

import numpy as np

from ..numerics import Rng
from . import ops
from .model import Model, loss_and_grads, model_forward


def relative_error(analytic, numeric) -> float:
    analytic = np.ravel(analytic)
    numeric = np.ravel(numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def numerical_gradient(f, x, eps=1e-6, indices=None):
    """``d f / d x`` by central differences; ``x`` is perturbed in place and restored."""
    flat = x.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    out = np.zeros(len(idx)) if indices is not None else np.zeros(flat.size)
    for n, i in enumerate(idx):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f()
        flat[i] = orig - eps
        fm = f()
        flat[i] = orig
        out[n] = (fp - fm) / (2 * eps)
    return out if indices is not None else out.reshape(x.shape)


def relu_pattern(fwd) -> bytes:
    """Packed on/off state of every ReLU in a forward pass."""
    masks = []
    for cache in fwd.caches:
        if isinstance(cache, np.ndarray) and cache.dtype == bool:
            masks.append(cache)
        elif isinstance(cache, ops.ResidualCache):
            masks += [cache.relu1, cache.relu2, cache.out_active]
    return np.packbits(np.concatenate([m.ravel() for m in masks])).tobytes() if masks else b""


def check_model_gradients(model: Model, X, y, *, dropout_seed=0, seed=0, eps=1e-6,
                          coords_per_param=6, max_redraws=20):
    """Compare analytic parameter gradients with finite differences.

    Every parameter tensor gets one unit-norm directional-derivative probe plus a
    coordinate probe on ``coords_per_param`` entries (always including the
    entry with the largest analytic gradient). Dropout masks are frozen by
    reseeding the train-mode forward with ``dropout_seed`` on every call.
    A probe whose +eps and -eps evaluations switch any ReLU on or off straddles
    a kink, where no derivative exists, and is redrawn on a smaller support.
    Returns ``{param_name: worst relative error}``.
    """
    rng = np.random.default_rng(seed)

    def evaluate():
        fwd = model_forward(model, X, ops.TRAIN, Rng(dropout_seed))
        value, _ = ops.softmax_xent_forward(fwd.logits, y)
        return value, relu_pattern(fwd)

    def central(p, delta):
        orig = p.copy()
        p += delta
        fp, sp = evaluate()
        p[...] = orig - delta
        fm, sm = evaluate()
        p[...] = orig
        return (fp - fm) / (2 * eps), sp == sm

    _, grads = loss_and_grads(model, X, y, ops.TRAIN, Rng(dropout_seed))
    errors = {}
    for name, p in model.params.items():
        g = grads[name]
        flat_g = g.reshape(-1)
        for attempt in range(max_redraws):
            v = rng.normal(size=p.shape)
            if attempt:
                # halve the support on each redraw so a pre-activation sitting
                # right at a kink can be stepped around
                support = max(1, p.size >> attempt)
                keep = np.zeros(p.size, dtype=bool)
                keep[rng.choice(p.size, support, replace=False)] = True
                v[~keep.reshape(p.shape)] = 0.0
            v /= np.linalg.norm(v)
            dd, smooth = central(p, eps * v)
            if smooth:
                break
        else:
            raise RuntimeError(f"could not find a kink-free direction for {name}")
        err_dir = relative_error([float(np.sum(g * v))], [dd])

        candidates = [int(np.argmax(np.abs(flat_g)))] + rng.permutation(p.size).tolist()
        picks, num = [], []
        for i in dict.fromkeys(candidates):
            if len(picks) == min(coords_per_param, p.size):
                break
            e = np.zeros(p.size)
            e[i] = eps
            d, smooth = central(p, e.reshape(p.shape))
            if smooth:
                picks.append(i)
                num.append(d)
        err_coord = relative_error(flat_g[picks], num)
        errors[name] = max(err_dir, err_coord)
    return errors
