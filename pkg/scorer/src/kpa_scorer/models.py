"""Scoring models behind the wire protocol.

Two kinds ship: a deterministic hash-based stub for integration tests and
demos, and a logistic layer over hand-built features produced by
``fine_tune``. Model files are plain JSON so they diff and version cleanly.
"""

import hashlib
import json
import math
from pathlib import Path
from typing import Protocol

from kpa_scorer.errors import ConfigError, DataError
from kpa_scorer.features import (
    MATCH_FEATURES,
    QUALITY_FEATURES,
    match_features,
    quality_features,
)

# Fixed quality head used until a trained one exists: favors short,
# clean-alphabet texts, mirroring the length heuristic downstream.
DEFAULT_QUALITY_WEIGHTS = [2.0, 1.0, 0.5]
DEFAULT_QUALITY_BIAS = -1.0


class Model(Protocol):
    def match_score(self, comment: str, key_point: str, topic: str) -> float: ...

    def quality_score(self, text: str, topic: str) -> float: ...

    def to_dict(self) -> dict: ...


def _unit_hash(*parts: str) -> float:
    digest = hashlib.sha256("\x1f".join(parts).encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


class StubModel:
    """Deterministic pseudo-scores from hashing the inputs."""

    kind = "stub"

    def match_score(self, comment: str, key_point: str, topic: str) -> float:
        return _unit_hash("match", comment, key_point, topic)

    def quality_score(self, text: str, topic: str) -> float:
        return _unit_hash("quality", text, topic)

    def to_dict(self) -> dict:
        return {"kind": self.kind}


class LogisticModel:
    """Sigmoid over hand-built features; see ``fine_tune`` for training."""

    kind = "logistic"

    def __init__(
        self,
        weights: list[float],
        bias: float,
        quality_weights: list[float] | None = None,
        quality_bias: float = DEFAULT_QUALITY_BIAS,
    ):
        if len(weights) != MATCH_FEATURES:
            raise ConfigError(f"expected {MATCH_FEATURES} match weights, got {len(weights)}")
        self.weights = [float(w) for w in weights]
        self.bias = float(bias)
        qw = DEFAULT_QUALITY_WEIGHTS if quality_weights is None else quality_weights
        if len(qw) != QUALITY_FEATURES:
            raise ConfigError(f"expected {QUALITY_FEATURES} quality weights, got {len(qw)}")
        self.quality_weights = [float(w) for w in qw]
        self.quality_bias = float(quality_bias)

    def match_score(self, comment: str, key_point: str, topic: str) -> float:
        feats = match_features(comment, key_point, topic)
        return _sigmoid(sum(w * f for w, f in zip(self.weights, feats)) + self.bias)

    def quality_score(self, text: str, topic: str) -> float:
        feats = quality_features(text, topic)
        return _sigmoid(
            sum(w * f for w, f in zip(self.quality_weights, feats)) + self.quality_bias
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "weights": self.weights,
            "bias": self.bias,
            "quality_weights": self.quality_weights,
            "quality_bias": self.quality_bias,
        }


def model_from_dict(doc: dict) -> Model:
    kind = doc.get("kind")
    if kind == "stub":
        return StubModel()
    if kind == "logistic":
        try:
            return LogisticModel(
                weights=doc["weights"],
                bias=doc["bias"],
                quality_weights=doc.get("quality_weights"),
                quality_bias=doc.get("quality_bias", DEFAULT_QUALITY_BIAS),
            )
        except KeyError as exc:
            raise DataError(f"model file missing field {exc}") from None
    raise DataError(f"unknown model kind {kind!r}")


def load_model(path: str | Path) -> Model:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed model file {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise DataError(f"model file {path} must hold a JSON object")
    return model_from_dict(doc)


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n")
