"""Shared test fixtures: tiny models and synthetic datasets."""

from __future__ import annotations

import numpy as np

from ablate_ci import Dataset


class FeatureReader:
    """Model that returns one feature column verbatim and ignores the rest."""

    def __init__(self, feature_index: int = 0):
        self.feature_index = feature_index

    def predict_batch(self, rows: np.ndarray) -> np.ndarray:
        return np.asarray(rows, dtype=np.float64)[:, self.feature_index].copy()


class CallCounter:
    """Wraps a model and counts predict_batch invocations."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def predict_batch(self, rows: np.ndarray) -> np.ndarray:
        self.calls += 1
        return self.inner.predict_batch(rows)


class BadShapeModel:
    """Deliberately violates the prediction-vector contract."""

    def predict_batch(self, rows: np.ndarray) -> np.ndarray:
        return np.zeros(rows.shape[0] + 1)


def two_point_dataset() -> Dataset:
    """The minimal x=[0,1], y=[0,1] single-feature dataset."""
    return Dataset(features=[[0.0], [1.0]], target=[0.0, 1.0], feature_names=("x",))


def make_regression(
    n: int, m: int, seed: int, noise: float = 0.1, weights=None
) -> Dataset:
    """Gaussian features with a linear target plus optional noise."""
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(n, m))
    if weights is None:
        weights = np.arange(1, m + 1, dtype=np.float64)
    target = features @ np.asarray(weights, dtype=np.float64)
    if noise > 0:
        target = target + noise * rng.normal(size=n)
    names = tuple(f"x{i}" for i in range(m))
    return Dataset(features=features, target=target, feature_names=names)


def make_binary(n: int, m: int, seed: int) -> Dataset:
    """Features in [0, 1] with a {0, 1} target correlated with feature 0."""
    rng = np.random.default_rng(seed)
    features = rng.uniform(size=(n, m))
    target = (features[:, 0] + 0.3 * rng.normal(size=n) > 0.5).astype(np.float64)
    names = tuple(f"x{i}" for i in range(m))
    return Dataset(features=features, target=target, feature_names=names)
