"""Declarative layer stacks, the TCN and 1D-CNN builders, and model execution."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import ClassVar

import numpy as np

from ..errors import ArgumentError, DimensionError
from ..numerics import Rng, glorot_uniform
from . import ops


# -- layer specs ------------------------------------------------------------

def _positive(name, value):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise ArgumentError(f"{name} must be an integer >= 1, got {value!r}")


def _rate(value):
    if not 0.0 <= float(value) < 1.0:
        raise ArgumentError(f"dropout rate must be in [0, 1), got {value!r}")


@dataclass(frozen=True)
class DilatedCausalConv:
    out_channels: int
    kernel_size: int
    dilation: int = 1
    kind: ClassVar[str] = "conv"

    def __post_init__(self):
        _positive("out_channels", self.out_channels)
        _positive("kernel_size", self.kernel_size)
        _positive("dilation", self.dilation)

    def output_shape(self, in_shape):
        _expect_sequence(self, in_shape)
        return (in_shape[0], self.out_channels)

    def param_shapes(self, in_shape):
        return {
            "kernel": (self.kernel_size, in_shape[1], self.out_channels),
            "bias": (self.out_channels,),
        }

    def forward(self, params, x, rng, mode):
        return ops.conv1d_causal_forward(x, params["kernel"], params["bias"], self.dilation)

    def backward(self, params, cache, g):
        gx, gk, gb = ops.conv1d_causal_backward(cache, g)
        return gx, {"kernel": gk, "bias": gb}


@dataclass(frozen=True)
class Relu:
    kind: ClassVar[str] = "relu"

    def output_shape(self, in_shape):
        return in_shape

    def param_shapes(self, in_shape):
        return {}

    def forward(self, params, x, rng, mode):
        return ops.relu_forward(x)

    def backward(self, params, cache, g):
        return ops.relu_backward(cache, g), {}


@dataclass(frozen=True)
class Dropout:
    rate: float
    kind: ClassVar[str] = "dropout"

    def __post_init__(self):
        _rate(self.rate)

    def output_shape(self, in_shape):
        return in_shape

    def param_shapes(self, in_shape):
        return {}

    def forward(self, params, x, rng, mode):
        return ops.dropout_forward(x, self.rate, rng, mode)

    def backward(self, params, cache, g):
        return ops.dropout_backward(cache, g), {}


@dataclass(frozen=True)
class Dense:
    units: int
    kind: ClassVar[str] = "dense"

    def __post_init__(self):
        _positive("units", self.units)

    def output_shape(self, in_shape):
        if len(in_shape) != 1:
            raise DimensionError(f"dense layer needs a flat input, got shape {in_shape}")
        return (self.units,)

    def param_shapes(self, in_shape):
        return {"weight": (in_shape[0], self.units), "bias": (self.units,)}

    def forward(self, params, x, rng, mode):
        return ops.dense_forward(x, params["weight"], params["bias"])

    def backward(self, params, cache, g):
        gx, gw, gb = ops.dense_backward(cache, g)
        return gx, {"weight": gw, "bias": gb}


@dataclass(frozen=True)
class Flatten:
    kind: ClassVar[str] = "flatten"

    def output_shape(self, in_shape):
        _expect_sequence(self, in_shape)
        return (in_shape[0] * in_shape[1],)

    def param_shapes(self, in_shape):
        return {}

    def forward(self, params, x, rng, mode):
        return ops.flatten(x)

    def backward(self, params, cache, g):
        return ops.unflatten(g, cache), {}


@dataclass(frozen=True)
class ResidualBlock:
    out_channels: int
    kernel_size: int
    dilation: int
    dropout_rate: float = 0.0
    kind: ClassVar[str] = "residual_block"

    def __post_init__(self):
        _positive("out_channels", self.out_channels)
        _positive("kernel_size", self.kernel_size)
        _positive("dilation", self.dilation)
        _rate(self.dropout_rate)

    def output_shape(self, in_shape):
        _expect_sequence(self, in_shape)
        return (in_shape[0], self.out_channels)

    def param_shapes(self, in_shape):
        cin, cout, k = in_shape[1], self.out_channels, self.kernel_size
        shapes = {
            "conv1.kernel": (k, cin, cout),
            "conv1.bias": (cout,),
            "conv2.kernel": (k, cout, cout),
            "conv2.bias": (cout,),
        }
        if cin != cout:
            shapes["proj.kernel"] = (1, cin, cout)
            shapes["proj.bias"] = (cout,)
        return shapes

    def forward(self, params, x, rng, mode):
        return ops.residual_block_forward(x, params, self.dilation, self.dropout_rate, rng, mode)

    def backward(self, params, cache, g):
        return ops.residual_block_backward(cache, g)


LAYER_TYPES = {cls.kind: cls for cls in
               (DilatedCausalConv, Relu, Dropout, Dense, Flatten, ResidualBlock)}


def _expect_sequence(layer, in_shape):
    if len(in_shape) != 2:
        raise DimensionError(f"{layer.kind} needs a (T, C) input, got shape {in_shape}")


def layer_to_dict(layer):
    return {"type": layer.kind, **asdict(layer)}


def layer_from_dict(d):
    d = dict(d)
    try:
        cls = LAYER_TYPES[d.pop("type")]
    except KeyError as exc:
        raise ArgumentError(f"unknown layer type in {d!r}") from exc
    return cls(**d)


# -- model spec -------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    input_length: int
    input_channels: int
    layers: tuple
    num_classes: int
    name: str = "model"

    def __post_init__(self):
        _positive("input_length", self.input_length)
        _positive("input_channels", self.input_channels)
        _positive("num_classes", self.num_classes)
        object.__setattr__(self, "layers", tuple(self.layers))
        out = self.layer_shapes()[-1]
        if out != (self.num_classes,):
            raise ArgumentError(
                f"last layer must emit {self.num_classes} logits, produces shape {out}")

    def layer_shapes(self):
        """Shape entering each layer, plus the final output shape."""
        shape = (self.input_length, self.input_channels)
        shapes = [shape]
        for layer in self.layers:
            shape = layer.output_shape(shape)
            shapes.append(shape)
        return shapes

    def parameter_shapes(self):
        """Ordered ``{name: shape}`` for every parameter, in layer order."""
        shapes = {}
        for i, (layer, in_shape) in enumerate(zip(self.layers, self.layer_shapes())):
            for pname, shp in layer.param_shapes(in_shape).items():
                shapes[f"layers.{i}.{pname}"] = tuple(shp)
        return shapes

    def dilations(self):
        return [layer.dilation for layer in self.layers
                if isinstance(layer, (ResidualBlock, DilatedCausalConv))]

    def to_dict(self):
        return {
            "name": self.name,
            "input_length": self.input_length,
            "input_channels": self.input_channels,
            "num_classes": self.num_classes,
            "layers": [layer_to_dict(layer) for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            input_length=d["input_length"],
            input_channels=d["input_channels"],
            layers=tuple(layer_from_dict(x) for x in d["layers"]),
            num_classes=d["num_classes"],
            name=d.get("name", "model"),
        )


def count_parameters(spec: ModelSpec) -> int:
    return int(sum(np.prod(s) for s in spec.parameter_shapes().values()))


def receptive_field(spec: ModelSpec) -> int:
    """Input timesteps that can reach one output position of the conv stack."""
    rf = 1
    for layer in spec.layers:
        if isinstance(layer, DilatedCausalConv):
            rf += (layer.kernel_size - 1) * layer.dilation
        elif isinstance(layer, ResidualBlock):
            rf += 2 * (layer.kernel_size - 1) * layer.dilation
        elif isinstance(layer, Flatten):
            break
    return rf


TCN_DEFAULTS = {
    "input_channels": 1,
    "kernel_size": 3,
    "channels": 64,
    "dilations": (1, 2, 4),
    "block_dropout": 0.1,
    "dense_units": 128,
    "head_dropout": 0.3,
}

CNN_DEFAULTS = {
    "input_channels": 1,
    "kernel_size": 3,
    "channels": 64,
    "dense_units": 128,
    "head_dropout": 0.3,
}


def _merge(defaults, overrides):
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise ArgumentError(f"unknown model overrides: {sorted(unknown)}")
    return {**defaults, **overrides}


def _head(cfg, num_classes):
    return [Flatten(), Dense(cfg["dense_units"]), Relu(),
            Dropout(cfg["head_dropout"]), Dense(num_classes)]


def build_tcn(input_length: int, num_classes: int = 15, **overrides) -> ModelSpec:
    """Three residual blocks (dilations 1, 2, 4 by default) and a dense head."""
    cfg = _merge(TCN_DEFAULTS, overrides)
    if len(cfg["dilations"]) < 1:
        raise ArgumentError("at least one residual block is required")
    blocks = [ResidualBlock(cfg["channels"], cfg["kernel_size"], int(d), cfg["block_dropout"])
              for d in cfg["dilations"]]
    return ModelSpec(input_length, cfg["input_channels"], tuple(blocks + _head(cfg, num_classes)),
                     num_classes, name="tcn")


def build_cnn_baseline(input_length: int, num_classes: int = 15, **overrides) -> ModelSpec:
    cfg = _merge(CNN_DEFAULTS, overrides)
    convs = [DilatedCausalConv(cfg["channels"], cfg["kernel_size"], 1), Relu(),
             DilatedCausalConv(cfg["channels"], cfg["kernel_size"], 1), Relu()]
    return ModelSpec(input_length, cfg["input_channels"], tuple(convs + _head(cfg, num_classes)),
                     num_classes, name="cnn_baseline")


BUILDERS = {"tcn": build_tcn, "cnn_baseline": build_cnn_baseline}


# -- model ------------------------------------------------------------------

@dataclass
class Model:
    spec: ModelSpec
    params: dict
    seed: int = 0
    overrides: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = self.spec.parameter_shapes()
        if list(self.params) != list(expected):
            raise DimensionError(
                f"parameter names {list(self.params)} do not match spec {list(expected)}")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise DimensionError(
                    f"parameter {name} has shape {self.params[name].shape}, spec needs {shape}")

    def layer_params(self, i):
        prefix = f"layers.{i}."
        return {k[len(prefix):]: v for k, v in self.params.items() if k.startswith(prefix)}

    def copy(self):
        return Model(self.spec, {k: v.copy() for k, v in self.params.items()},
                     self.seed, dict(self.overrides), dict(self.metadata))


def init_model(spec: ModelSpec, rng: Rng, overrides=None) -> Model:
    """Glorot-uniform kernels and dense weights, zero biases."""
    params = {}
    for name, shape in spec.parameter_shapes().items():
        if name.endswith("bias"):
            params[name] = np.zeros(shape)
        elif name.endswith("kernel"):
            k, cin, cout = shape
            params[name] = glorot_uniform(rng, k * cin, k * cout, shape)
        else:
            params[name] = glorot_uniform(rng, shape[0], shape[1], shape)
    return Model(spec, params, seed=rng.seed, overrides=dict(overrides or {}))


def build_model(name: str, input_length: int, num_classes: int, rng: Rng, **overrides) -> Model:
    try:
        builder = BUILDERS[name]
    except KeyError as exc:
        raise ArgumentError(f"unknown model {name!r}; choose from {sorted(BUILDERS)}") from exc
    return init_model(builder(input_length, num_classes, **overrides), rng, overrides)


def as_sequences(X, spec: ModelSpec):
    """Feature rows ``(N, T*C)`` -> model input ``(N, T, C)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 3:
        return X
    want = spec.input_length * spec.input_channels
    if X.ndim != 2 or X.shape[1] != want:
        raise DimensionError(f"expected rows of {want} features, got shape {X.shape}")
    return X.reshape(X.shape[0], spec.input_length, spec.input_channels)


@dataclass
class Forward:
    logits: np.ndarray
    probs: np.ndarray
    caches: list


def model_forward(model: Model, batch, mode=ops.INFERENCE, rng=None, *, stop_at=None):
    """Run the stack on ``(B, T, C)``.

    With ``stop_at=i`` the activations entering layer ``i`` are returned
    instead of a :class:`Forward`.
    """
    x = as_sequences(batch, model.spec)
    if x.shape[1:] != (model.spec.input_length, model.spec.input_channels):
        raise DimensionError(f"batch shape {x.shape} does not match spec input "
                             f"({model.spec.input_length}, {model.spec.input_channels})")
    caches = []
    for i, layer in enumerate(model.spec.layers):
        if i == stop_at:
            return x
        x, cache = layer.forward(model.layer_params(i), x, rng, mode)
        caches.append(cache)
    return Forward(x, ops.softmax(x), caches)


def forward_features(model: Model, batch):
    """Inference-mode output of the convolutional stack (before flattening)."""
    idx = next(i for i, layer in enumerate(model.spec.layers) if isinstance(layer, Flatten))
    return model_forward(model, batch, ops.INFERENCE, stop_at=idx)


def model_backward(model: Model, fwd: Forward, labels):
    """Gradients of the mean cross-entropy w.r.t. every parameter, in spec order."""
    g = ops.softmax_xent_backward(fwd.probs, labels)
    grads = {}
    for i in range(len(model.spec.layers) - 1, -1, -1):
        layer = model.spec.layers[i]
        g, layer_grads = layer.backward(model.layer_params(i), fwd.caches[i], g)
        for pname, value in layer_grads.items():
            grads[f"layers.{i}.{pname}"] = value
    return {name: grads[name] for name in model.params}


def loss_and_grads(model: Model, batch, labels, mode=ops.TRAIN, rng=None):
    fwd = model_forward(model, batch, mode, rng)
    loss, _ = ops.softmax_xent_forward(fwd.logits, labels)
    return loss, model_backward(model, fwd, labels)


def predict_proba(model: Model, X, batch_size: int = 256):
    X = as_sequences(X, model.spec)
    out = [model_forward(model, X[i:i + batch_size]).probs
           for i in range(0, X.shape[0], batch_size)]
    if not out:
        return np.empty((0, model.spec.num_classes))
    return np.concatenate(out)


def predict(model: Model, X, batch_size: int = 256):
    """Class indices; ``argmax`` resolves exact ties toward the lowest index."""
    return np.argmax(predict_proba(model, X, batch_size), axis=1)
