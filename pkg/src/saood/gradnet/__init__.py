from .autodiff import Tensor
from .net import (
    GradientSet,
    NonFiniteError,
    ParameterSet,
    forward,
    grad_of_loss,
    init_params,
    learning_rate,
    sgd_step,
)
from .config import TrainConfig

__all__ = [
    "GradientSet",
    "NonFiniteError",
    "ParameterSet",
    "Tensor",
    "TrainConfig",
    "forward",
    "grad_of_loss",
    "init_params",
    "learning_rate",
    "sgd_step",
]
