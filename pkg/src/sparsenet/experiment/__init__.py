from sparsenet.experiment.config import (
    ConfigFileError,
    DatasetSpec,
    SweepSpec,
    TrainSpec,
    TrainingSpec,
    load_sweep,
    load_train,
    parse_sweep,
    parse_train,
)
from sparsenet.experiment.report import correlation_report, figure_tables, pearson, write_report
from sparsenet.experiment.sweep import SweepError, SweepResult, cells, run_sweep

__all__ = [
    "ConfigFileError",
    "DatasetSpec",
    "SweepError",
    "SweepResult",
    "SweepSpec",
    "TrainSpec",
    "TrainingSpec",
    "cells",
    "correlation_report",
    "figure_tables",
    "load_sweep",
    "load_train",
    "parse_sweep",
    "parse_train",
    "pearson",
    "run_sweep",
    "write_report",
]
