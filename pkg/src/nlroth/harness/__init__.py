"""Generators, the experiment runner and the command line."""

from .generators import GeneratorError, GeneratorSpec, generate, random_phase_triple
from .runner import ConfigError, ExperimentConfig, TaskError, hash_outputs, run_experiment

__all__ = ["GeneratorError", "GeneratorSpec", "generate", "random_phase_triple", "ConfigError",
           "ExperimentConfig", "TaskError", "hash_outputs", "run_experiment"]
