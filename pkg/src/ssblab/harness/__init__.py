"""Experiment harness: configs, runners, and the command-line interface."""

from .config import ExperimentConfig, ConfigError, load, config_hash
from .runs import RunRecord, run, report
