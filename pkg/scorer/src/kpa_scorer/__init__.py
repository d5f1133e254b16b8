"""Scoring sidecar: serves match and quality scores over the wire protocol."""

from kpa_scorer.errors import ConfigError, DataError
from kpa_scorer.models import LogisticModel, StubModel, load_model, save_model
from kpa_scorer.service import create_app
from kpa_scorer.train import LR_DEFAULTS, TrainConfig, fine_tune, load_pairs_csv

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "LogisticModel",
    "StubModel",
    "load_model",
    "save_model",
    "create_app",
    "LR_DEFAULTS",
    "TrainConfig",
    "fine_tune",
    "load_pairs_csv",
    "__version__",
]
