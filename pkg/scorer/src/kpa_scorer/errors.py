class ScorerError(Exception):
    """Base class for sidecar failures."""


class ConfigError(ScorerError):
    """Bad model, training, or CLI configuration."""


class DataError(ScorerError):
    """Unusable input data (pairs file, model file, request body)."""
