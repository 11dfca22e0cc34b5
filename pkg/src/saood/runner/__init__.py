from .commands import EvalReport, cmd_ablate, cmd_eval, cmd_sweep, cmd_train, cmd_trend, cmd_verify
from .config import ConfigError, ExperimentConfig, load_config
from .experiment import build_data, evaluate, train

__all__ = [
    "ConfigError",
    "EvalReport",
    "ExperimentConfig",
    "build_data",
    "cmd_ablate",
    "cmd_eval",
    "cmd_sweep",
    "cmd_train",
    "cmd_trend",
    "cmd_verify",
    "evaluate",
    "load_config",
    "train",
]
