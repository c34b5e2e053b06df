"""Domain types, loss functions, and fixed-data risk evaluation.

Everything downstream (replacement tables, delta matrices, confidence
intervals) is built on the primitives defined here: a validated tabular
dataset, a loss specification, the batch-prediction contract a model must
satisfy, and the empirical (fixed-data) risk of a model on a dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

LOSS_KINDS = ("squared", "absolute", "zero_one", "log_loss")


class AblationError(Exception):
    """Base class for all errors raised by this library."""


class InvalidArgumentError(AblationError, ValueError):
    """An argument violates a documented precondition."""


class InsufficientSamplesError(InvalidArgumentError):
    """Too few samples for the requested statistic (variance needs n >= 2)."""


class ModelContractError(AblationError, RuntimeError):
    """A model violated the batch-prediction contract or the wire protocol."""


class SingularFitError(AblationError, ValueError):
    """Closed-form fit hit a singular system; regularization would fix it."""


class IngestionError(AblationError, ValueError):
    """Input data could not be parsed into a valid dataset."""


@runtime_checkable
class ModelInterface(Protocol):
    """Behavioral contract for any predictor usable with this library.

    Implementations must be deterministic (identical batch in, identical
    vector out), order-preserving (prediction b belongs to row b), and free
    of observable state changes between calls.  Implementations that cannot
    tolerate concurrent calls may expose ``serial = True``; the engine is
    single-threaded per model either way.
    """

    def predict_batch(self, rows: np.ndarray) -> np.ndarray:
        """Predict a length-B vector for a B x M matrix of rows."""
        ...


@dataclass(frozen=True, eq=False)
class Dataset:
    """An N x M feature matrix with a length-N target vector.

    Rejects anything a downstream statistic would silently corrupt on:
    fewer than two rows, missing columns, duplicate names, or non-finite
    cells.
    """

    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        target = np.asarray(self.target, dtype=np.float64)
        names = tuple(str(n) for n in self.feature_names)
        if features.ndim != 2:
            raise InvalidArgumentError("features must be a 2-D matrix")
        n, m = features.shape
        if n < 2:
            raise InvalidArgumentError("a dataset needs at least 2 rows")
        if m < 1:
            raise InvalidArgumentError("a dataset needs at least 1 feature")
        if target.shape != (n,):
            raise InvalidArgumentError(
                f"target must have length {n}, got shape {target.shape}"
            )
        if len(names) != m:
            raise InvalidArgumentError(
                f"expected {m} feature names, got {len(names)}"
            )
        if len(set(names)) != len(names):
            raise InvalidArgumentError("feature names must be unique")
        if not np.isfinite(features).all():
            raise InvalidArgumentError("features contain non-finite values")
        if not np.isfinite(target).all():
            raise InvalidArgumentError("target contains non-finite values")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def column(self, feature_index: int) -> np.ndarray:
        """Return a copy of one feature column."""
        if not 0 <= feature_index < self.n_features:
            raise IndexError(
                f"feature index {feature_index} out of range [0, {self.n_features})"
            )
        return self.features[:, feature_index].copy()


@dataclass(frozen=True)
class LossSpec:
    """Which per-point loss to use and its parameters.

    ``threshold`` applies to zero_one only: prediction and target are both
    thresholded before comparison.  ``epsilon`` applies to log_loss only:
    predictions are clipped into [epsilon, 1 - epsilon] so the loss stays
    finite.
    """

    kind: str = "squared"
    threshold: float = 0.5
    epsilon: float = 1e-12

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise InvalidArgumentError(
                f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}"
            )
        if not math.isfinite(self.threshold):
            raise InvalidArgumentError("zero_one threshold must be finite")
        if not 0.0 < self.epsilon < 0.5:
            raise InvalidArgumentError("log_loss epsilon must be in (0, 0.5)")


@dataclass(frozen=True, eq=False)
class RiskReport:
    """Fixed-data risk plus the per-point losses it averages."""

    risk: float
    per_point_losses: np.ndarray


def loss_values(
    loss: LossSpec, predictions: np.ndarray, targets: np.ndarray
) -> np.ndarray:
    """Vectorized per-point losses; the single source of loss arithmetic.

    Raises InvalidArgumentError on non-finite inputs, on targets outside
    {0, 1} for log_loss, and on overflow (a loss value must be finite).
    """
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise InvalidArgumentError(
            f"predictions shape {p.shape} != targets shape {t.shape}"
        )
    if not np.isfinite(p).all():
        raise InvalidArgumentError("non-finite prediction passed to loss")
    if not np.isfinite(t).all():
        raise InvalidArgumentError("non-finite target passed to loss")

    with np.errstate(over="ignore"):  # overflow is rejected below, not propagated
        if loss.kind == "squared":
            out = (p - t) ** 2
        elif loss.kind == "absolute":
            out = np.abs(p - t)
        elif loss.kind == "zero_one":
            agree = (p >= loss.threshold) == (t >= loss.threshold)
            out = np.where(agree, 0.0, 1.0)
        else:  # log_loss
            if not np.all((t == 0.0) | (t == 1.0)):
                raise InvalidArgumentError("log_loss requires targets in {0, 1}")
            q = np.clip(p, loss.epsilon, 1.0 - loss.epsilon)
            out = -(t * np.log(q) + (1.0 - t) * np.log1p(-q))

    if not np.isfinite(out).all():
        raise InvalidArgumentError("loss overflowed to a non-finite value")
    return out


def compute_loss(loss: LossSpec, prediction: float, target: float) -> float:
    """Loss of a single (prediction, target) pair; always finite and >= 0."""
    value = loss_values(
        loss, np.asarray([prediction], dtype=np.float64), np.asarray([target], dtype=np.float64)
    )
    return float(value[0])


def predict_checked(model: ModelInterface, rows: np.ndarray) -> np.ndarray:
    """Call the model on a batch and enforce the prediction-vector contract."""
    raw = model.predict_batch(rows)
    out = np.asarray(raw, dtype=np.float64)
    if out.ndim == 2 and out.shape[1] == 1:
        out = out[:, 0]
    if out.shape != (rows.shape[0],):
        raise ModelContractError(
            f"model returned shape {np.shape(raw)} for a batch of {rows.shape[0]} rows"
        )
    return out


def fixed_data_risk(
    model: ModelInterface, data: Dataset, loss: LossSpec
) -> RiskReport:
    """Average loss of the model over the concrete dataset.

    The mean is accumulated with compensated summation, so the reported
    risk is the correctly rounded mean of the per-point losses and is
    invariant to row order.
    """
    predictions = predict_checked(model, data.features)
    per_point = loss_values(loss, predictions, data.target)
    risk = math.fsum(per_point) / data.n_rows
    return RiskReport(risk=risk, per_point_losses=per_point)


def mean_exact(values: Sequence[float] | np.ndarray) -> float:
    """Correctly rounded arithmetic mean (order-independent)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise InvalidArgumentError("mean of an empty sequence")
    return math.fsum(arr.ravel()) / arr.size
