"""Fine-tuning for the logistic match model.

The learning-rate defaults follow the per-base-model settings that work in
practice for this task family; the two supported epoch budgets are the
short schedule (3) for match training and the long one (9) for low-signal
data. Train and dev sets must be topic-disjoint so tuned numbers are
honest about generalization.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from kpa_scorer.errors import ConfigError, DataError
from kpa_scorer.features import match_features
from kpa_scorer.models import LogisticModel

LR_DEFAULTS = {
    "bert": 2e-5,
    "xlnet": 7e-6,
    "roberta": 5e-6,
    "albert": 1e-5,
}

ALLOWED_EPOCHS = (3, 9)

_TRUE = {"1", "true", "yes"}
_FALSE = {"0", "false", "no"}


def default_learning_rate(base_model: str) -> float:
    name = base_model.lower()
    # Order matters: "roberta" and "albert" would otherwise fall through to
    # a substring match on "bert".
    for family in ("roberta", "albert", "xlnet", "bert"):
        if name.startswith(family):
            return LR_DEFAULTS[family]
    raise ConfigError(
        f"no default learning rate for base model {base_model!r}; set learning_rate"
    )


@dataclass(frozen=True)
class LabeledPair:
    comment: str
    key_point: str
    topic: str
    label: bool


@dataclass(frozen=True)
class TrainConfig:
    base_model: str
    epochs: int = 3
    learning_rate: Optional[float] = None
    seed: int = 0
    resolved_lr: float = field(init=False)

    def __post_init__(self):
        if self.epochs not in ALLOWED_EPOCHS:
            raise ConfigError(f"epochs must be one of {ALLOWED_EPOCHS}, got {self.epochs}")
        lr = self.learning_rate
        if lr is None:
            lr = default_learning_rate(self.base_model)
        if lr <= 0:
            raise ConfigError(f"learning_rate must be positive, got {lr}")
        object.__setattr__(self, "resolved_lr", lr)


def load_pairs_csv(path: str | Path) -> list[LabeledPair]:
    """Read labeled pairs: columns topic, stance, comment_text, key_point_text, label."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"pairs file not found: {path}")
    pairs = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"topic", "comment_text", "key_point_text", "label"}
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"pairs file missing columns: {', '.join(sorted(missing))}")
        for line_no, row in enumerate(reader, start=2):
            raw = (row["label"] or "").strip().lower()
            if raw in _TRUE:
                label = True
            elif raw in _FALSE:
                label = False
            else:
                raise DataError(f"{path}:{line_no}: bad label {row['label']!r}")
            pairs.append(
                LabeledPair(
                    comment=row["comment_text"],
                    key_point=row["key_point_text"],
                    topic=row["topic"],
                    label=label,
                )
            )
    if not pairs:
        raise DataError(f"no labeled pairs in {path}")
    return pairs


def check_topic_disjoint(train: Sequence[LabeledPair], dev: Sequence[LabeledPair]) -> None:
    overlap = {p.topic for p in train} & {p.topic for p in dev}
    if overlap:
        raise DataError(
            f"train and dev share topics: {', '.join(sorted(overlap))}"
        )


def _design(pairs: Sequence[LabeledPair]) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([match_features(p.comment, p.key_point, p.topic) for p in pairs])
    y = np.array([1.0 if p.label else 0.0 for p in pairs])
    return x, y


def _loss(x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float) -> float:
    z = x @ w + b
    # log(1 + e^z) - y*z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def fine_tune(
    config: TrainConfig,
    train: Sequence[LabeledPair],
    dev: Sequence[LabeledPair] = (),
) -> tuple[LogisticModel, list[float]]:
    """Full-batch gradient descent on logistic loss.

    Returns the trained model and the loss history (initial loss plus one
    entry per epoch), which is nonincreasing at any sane learning rate.
    """
    if not train:
        raise DataError("no training pairs")
    if dev:
        check_topic_disjoint(train, dev)
    rng = np.random.default_rng(config.seed)
    x, y = _design(train)
    w = rng.normal(0.0, 0.01, size=x.shape[1])
    b = 0.0
    history = [_loss(x, y, w, b)]
    for _ in range(config.epochs):
        z = x @ w + b
        p = 1.0 / (1.0 + np.exp(-z))
        grad_w = x.T @ (p - y) / len(y)
        grad_b = float(np.mean(p - y))
        w -= config.resolved_lr * grad_w
        b -= config.resolved_lr * grad_b
        history.append(_loss(x, y, w, b))
    return LogisticModel(weights=w.tolist(), bias=b), history
