"""Drought-wilt phenotyping from multi-sensor plot imagery."""
from .errors import ConfigError, DataError, IOFailure, WiltscanError
from .forest import ForestConfig, ForestModel, predict, train_random_forest

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "IOFailure", "WiltscanError",
    "ForestConfig", "ForestModel", "predict", "train_random_forest",
]
