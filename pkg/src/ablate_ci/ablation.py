"""Replacement tables and ablation loss deltas.

Ablating feature i means overwriting its value in a row with a draw from
the feature's own empirical column, which destroys any information the
feature carried while preserving its marginal distribution.  A replacement
table holds the N x K values used for one feature; the delta matrix holds
the resulting per-point loss changes.

Randomness comes from numpy's Philox counter-based generator keyed directly
by the 64-bit table seed, so identical (data, feature, K, seed, mode) inputs
reproduce bit-identical tables.  Derived seeds (per feature, per coverage
replicate) come from ``derive_seed``, which feeds the master seed and an
index path through ``numpy.random.SeedSequence``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Dataset,
    InvalidArgumentError,
    LossSpec,
    ModelInterface,
    fixed_data_risk,
    loss_values,
    predict_checked,
)

TABLE_MODES = ("resample", "permute", "exact")

_SEED_MAX = 2**64


def derive_seed(master_seed: int, *path: int) -> int:
    """Derive a 64-bit child seed from a master seed and an index path.

    Deterministic and documented: the integers are mixed through
    ``numpy.random.SeedSequence`` and the first word of its state is
    returned.  Distinct paths give statistically independent streams.
    """
    entropy = [_check_seed(master_seed)] + [int(p) for p in path]
    if any(p < 0 for p in entropy[1:]):
        raise InvalidArgumentError("seed derivation path must be nonnegative")
    ss = np.random.SeedSequence(entropy)
    return int(ss.generate_state(1, np.uint64)[0])


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < _SEED_MAX:
        raise InvalidArgumentError("seed must be a 64-bit unsigned integer")
    return seed


def _generator(seed: int) -> np.random.Generator:
    # Philox is counter-based: the key alone fixes the whole stream.
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


@dataclass(frozen=True, eq=False)
class ReplacementTable:
    """The N x K ablation values drawn for one feature.

    ``values`` is flat in replicate-major order: index s = k * N + j holds
    the value for row j in replicate k (the s = (k-1)*N + j convention,
    zero-based).  Every entry is one of the source column's values.
    """

    feature_index: int
    values: np.ndarray
    K: int
    mode: str
    seed: int
    n_rows: int

    def replicate_block(self, k: int) -> np.ndarray:
        """The N replacement values of replicate k (zero-based)."""
        if not 0 <= k < self.K:
            raise IndexError(f"replicate {k} out of range [0, {self.K})")
        n = self.n_rows
        return self.values[k * n : (k + 1) * n]

    def as_grid(self) -> np.ndarray:
        """Values reshaped to (K, N): grid[k, j] is row j's value in replicate k."""
        return self.values.reshape(self.K, self.n_rows)


def draw_replacement_table(
    data: Dataset,
    feature_index: int,
    K: int,
    seed: int,
    mode: str = "resample",
) -> ReplacementTable:
    """Draw the N x K replacement values for one feature.

    Modes:
      resample  i.i.d. uniform draws from the column, with replacement
      permute   K independent uniform shuffles of the column, one per
                replicate, so each replicate block is exactly the column's
                multiset
      exact     deterministic enumeration: K is forced to N and replicate k
                assigns the k-th row's column value to every row (no
                randomness; the oracle grid)

    A replacement may equal the row's own original value; the empirical
    marginal is sampled without exclusions.
    """
    if not 0 <= feature_index < data.n_features:
        raise IndexError(
            f"feature index {feature_index} out of range [0, {data.n_features})"
        )
    if mode not in TABLE_MODES:
        raise InvalidArgumentError(
            f"unknown table mode {mode!r}; expected one of {TABLE_MODES}"
        )
    seed = _check_seed(seed)
    column = data.column(feature_index)
    n = data.n_rows

    if mode == "exact":
        K = n
        values = np.repeat(column, n)
    else:
        K = int(K)
        if K < 1:
            raise InvalidArgumentError("K must be >= 1")
        rng = _generator(seed)
        if mode == "resample":
            idx = rng.integers(0, n, size=n * K)
            values = column[idx]
        else:  # permute
            values = np.concatenate([rng.permutation(column) for _ in range(K)])

    return ReplacementTable(
        feature_index=feature_index,
        values=values,
        K=K,
        mode=mode,
        seed=seed,
        n_rows=n,
    )


def ablate_row(row: np.ndarray, feature_index: int, z: float) -> np.ndarray:
    """Copy of ``row`` with position ``feature_index`` replaced by ``z``."""
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1:
        raise InvalidArgumentError("row must be 1-D")
    if not 0 <= feature_index < row.shape[0]:
        raise IndexError(
            f"feature index {feature_index} out of range [0, {row.shape[0]})"
        )
    out = row.copy()
    out[feature_index] = z
    return out


@dataclass(frozen=True, eq=False)
class DeltaMatrix:
    """N x K grid of ablation loss deltas for one feature.

    deltas[j, k] = loss(model(row j with replicate k's value), y_j)
                 - loss(model(row j), y_j)

    Positive entries mean the ablation hurt the prediction.  If the model
    ignores the ablated feature every entry is exactly zero, because both
    loss terms are computed from bit-identical predictions.
    """

    deltas: np.ndarray
    feature_index: int
    baseline_risk: float

    @property
    def n_rows(self) -> int:
        return self.deltas.shape[0]

    @property
    def K(self) -> int:
        return self.deltas.shape[1]


def compute_delta_matrix(
    model: ModelInterface,
    data: Dataset,
    loss: LossSpec,
    table: ReplacementTable,
) -> DeltaMatrix:
    """Evaluate all N x K ablation loss deltas for one feature.

    Baseline losses are computed once and shared across replicates.
    Ablated predictions are requested one replicate per batch; batching is
    an implementation detail and cannot affect the values, since each cell
    is written independently.
    """
    n, i = data.n_rows, table.feature_index
    if table.n_rows != n or table.values.shape != (n * table.K,):
        raise InvalidArgumentError("replacement table does not match dataset shape")
    if not 0 <= i < data.n_features:
        raise IndexError(f"feature index {i} out of range [0, {data.n_features})")
    column = data.features[:, i]
    if not np.isin(table.values, column).all():
        raise InvalidArgumentError(
            "replacement table contains values absent from the dataset column"
        )

    baseline = fixed_data_risk(model, data, loss)
    deltas = np.empty((n, table.K), dtype=np.float64)
    ablated = data.features.copy()
    for k in range(table.K):
        ablated[:, i] = table.replicate_block(k)
        predictions = predict_checked(model, ablated)
        losses_k = loss_values(loss, predictions, data.target)
        deltas[:, k] = losses_k - baseline.per_point_losses

    return DeltaMatrix(
        deltas=deltas, feature_index=i, baseline_risk=baseline.risk
    )
