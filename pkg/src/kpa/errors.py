"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
ScorerError (and subclasses) -> 3.
"""


class KpaError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(KpaError):
    """Invalid configuration or usage."""


class DataError(KpaError):
    """Malformed or inconsistent input data."""


class ScorerError(KpaError):
    """A scorer failed to produce a usable score."""


class TransportError(ScorerError):
    """A remote scorer could not be reached after retries."""


class ProtocolError(ScorerError):
    """A remote scorer violated the wire protocol (e.g. score out of range)."""
