from .io import load_model, save_model
from .model import (
    BUILDERS,
    Dense,
    DilatedCausalConv,
    Dropout,
    Flatten,
    Forward,
    Model,
    ModelSpec,
    Relu,
    ResidualBlock,
    build_cnn_baseline,
    build_model,
    build_tcn,
    count_parameters,
    forward_features,
    init_model,
    loss_and_grads,
    model_backward,
    model_forward,
    predict,
    predict_proba,
    receptive_field,
)
from .ops import INFERENCE, TRAIN
