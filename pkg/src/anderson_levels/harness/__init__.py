from .config import ConfigError, ExperimentConfig, config_from_dict, parse_config
from .runner import run_experiment

__all__ = ["ConfigError", "ExperimentConfig", "config_from_dict", "parse_config", "run_experiment"]
