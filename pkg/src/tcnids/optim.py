"""Adam and the mini-batch training loop."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ArgumentError, DimensionError, LabelError, TrainingError
from .nn import ops
from .nn.model import Model, as_sequences, loss_and_grads, model_forward
from .numerics import Rng

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, **kwargs):
        state = cls(**kwargs)
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
        return state


def adam_step(params: dict, grads: dict, state: AdamState):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if set(grads) != set(params):
        raise DimensionError(f"gradient names {sorted(grads)} != parameter names {sorted(params)}")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


@dataclass
class TrainConfig:
    epochs: int = 5
    learning_rate: float = 0.001
    batch_size: int = 32
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ArgumentError("epochs and batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise ArgumentError(f"learning_rate must be >= 0, got {self.learning_rate}")


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float
    seconds: float

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class Split:
    """Feature rows and integer labels for one partition."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.shape[0] != self.y.shape[0]:
            raise DimensionError(f"{self.X.shape[0]} rows but {self.y.shape[0]} labels")

    def __len__(self):
        return self.y.shape[0]


def evaluate(model: Model, split: Split, batch_size: int = 256):
    """Inference-mode mean cross-entropy and argmax accuracy."""
    if len(split) == 0:
        raise ArgumentError("cannot evaluate on an empty split")
    X = as_sequences(split.X, model.spec)
    total_loss = 0.0
    correct = 0
    for i in range(0, len(split), batch_size):
        yb = split.y[i:i + batch_size]
        fwd = model_forward(model, X[i:i + batch_size], ops.INFERENCE)
        loss, probs = ops.softmax_xent_forward(fwd.logits, yb)
        total_loss += loss * len(yb)
        correct += int(np.sum(np.argmax(probs, axis=1) == yb))
    return {"loss": total_loss / len(split), "accuracy": correct / len(split)}


def train(model: Model, train_split: Split, val_split: Split, config: TrainConfig,
          rng: Rng | None = None, log_path=None):
    """Train ``model`` in place; returns ``(model, [EpochLog, ...])``.

    Each epoch shuffles, runs every batch (the last may be short) through a
    train-mode forward/backward and an Adam step, then evaluates both splits
    in inference mode. There is no early stopping and no schedule.
    """
    if len(train_split) == 0 or len(val_split) == 0:
        raise ArgumentError("training and validation splits must be non-empty")
    k = model.spec.num_classes
    for part, split in (("train", train_split), ("validation", val_split)):
        bad = np.flatnonzero((split.y < 0) | (split.y >= k))
        if bad.size:
            raise LabelError(f"{part} label {split.y[bad[0]]} at index {bad[0]} is outside "
                             f"[0, {k})", index=int(bad[0]))
    rng = rng or Rng(config.seed)
    shuffle_rng = rng.child("shuffle")
    dropout_rng = rng.child("dropout")
    X = as_sequences(train_split.X, model.spec)
    state = AdamState.for_params(model.params, learning_rate=config.learning_rate)
    logs = []
    sink = open(log_path, "w") if log_path is not None else None
    try:
        for epoch in range(1, config.epochs + 1):
            start = time.perf_counter()
            n = len(train_split)
            order = shuffle_rng.permutation(n) if config.shuffle else np.arange(n)
            for b, i in enumerate(range(0, n, config.batch_size)):
                idx = order[i:i + config.batch_size]
                loss, grads = loss_and_grads(model, X[idx], train_split.y[idx],
                                             ops.TRAIN, dropout_rng)
                if not np.isfinite(loss):
                    raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}",
                                        epoch=epoch, batch=b)
                adam_step(model.params, grads, state)
            tr = evaluate(model, train_split)
            va = evaluate(model, val_split)
            if not (np.isfinite(tr["loss"]) and np.isfinite(va["loss"])):
                raise TrainingError(f"non-finite evaluation loss after epoch {epoch}", epoch=epoch)
            entry = EpochLog(epoch, tr["loss"], tr["accuracy"], va["loss"], va["accuracy"],
                             time.perf_counter() - start)
            logs.append(entry)
            log.info("epoch %d: loss %.4f acc %.4f | val loss %.4f acc %.4f (%.1fs)",
                     epoch, entry.train_loss, entry.train_accuracy, entry.val_loss,
                     entry.val_accuracy, entry.seconds)
            if sink is not None:
                sink.write(entry.to_json() + "\n")
                sink.flush()
    finally:
        if sink is not None:
            sink.close()
    return model, logs
