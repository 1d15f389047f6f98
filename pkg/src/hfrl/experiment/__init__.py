from .config import (
    METHODS,
    MODEL_PRESETS,
    ROUND_BASED_METHODS,
    TRAINING_PRESETS,
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    load_config,
)
from .baselines import ActuatedController, FixedTimeController
from .runner import RunResult, run_experiment

__all__ = [
    "METHODS",
    "MODEL_PRESETS",
    "ROUND_BASED_METHODS",
    "TRAINING_PRESETS",
    "ConfigError",
    "ExperimentConfig",
    "config_from_dict",
    "load_config",
    "ActuatedController",
    "FixedTimeController",
    "RunResult",
    "run_experiment",
]
