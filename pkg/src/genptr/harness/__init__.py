"""Experiment harness: ingestion, configuration, drivers and result emission."""

from .config import ConfigError, ExperimentConfig, load_config
from .data import IngestError, Splits, ingest_csv
from .experiments import SCHEMA_COLUMNS, run_experiment
from .output import emit_results

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "IngestError",
    "Splits",
    "ingest_csv",
    "SCHEMA_COLUMNS",
    "run_experiment",
    "emit_results",
]
