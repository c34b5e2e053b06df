"""Replacement tables, row ablation, and delta matrices."""

import math

import numpy as np
import pytest

from ablate_ci import (
    Dataset,
    InvalidArgumentError,
    LossSpec,
    ablate_row,
    compute_delta_matrix,
    derive_seed,
    draw_replacement_table,
    fit_constant,
    fixed_data_risk,
)

from helpers import FeatureReader, make_regression, two_point_dataset


class TestDeriveSeed:
    def test_deterministic_and_path_sensitive(self):
        assert derive_seed(7, 3) == derive_seed(7, 3)
        assert derive_seed(7, 3) != derive_seed(7, 4)
        assert derive_seed(7, 3) != derive_seed(8, 3)

    def test_returns_64_bit_unsigned(self):
        for s in (0, 1, 2**63, 2**64 - 1):
            child = derive_seed(s, 12)
            assert 0 <= child < 2**64

    def test_rejects_out_of_range_master(self):
        with pytest.raises(InvalidArgumentError):
            derive_seed(-1, 0)
        with pytest.raises(InvalidArgumentError):
            derive_seed(2**64, 0)


class TestDrawReplacementTable:
    def test_degenerate_column_always_that_value(self):
        data = Dataset(
            features=[[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]],
            target=[0.0, 0.0, 0.0],
            feature_names=("c", "d"),
        )
        for mode in ("resample", "permute", "exact"):
            table = draw_replacement_table(data, 0, K=4, seed=9, mode=mode)
            assert np.all(table.values == 5.0)

    def test_permute_blocks_are_column_multisets(self):
        data = Dataset(
            features=[[1.0], [2.0], [3.0]],
            target=[0.0, 0.0, 0.0],
            feature_names=("a",),
        )
        table = draw_replacement_table(data, 0, K=2, seed=42, mode="permute")
        for k in range(2):
            block = np.sort(table.replicate_block(k))
            np.testing.assert_array_equal(block, [1.0, 2.0, 3.0])

    def test_exact_enumerates_column_values_per_replicate(self):
        data = two_point_dataset()
        table = draw_replacement_table(data, 0, K=99, seed=0, mode="exact")
        assert table.K == 2  # K forced to N
        np.testing.assert_array_equal(table.replicate_block(0), [0.0, 0.0])
        np.testing.assert_array_equal(table.replicate_block(1), [1.0, 1.0])

    def test_resample_closure_over_column(self):
        data = make_regression(40, 3, seed=5)
        table = draw_replacement_table(data, 2, K=7, seed=17, mode="resample")
        assert table.values.shape == (40 * 7,)
        assert np.isin(table.values, data.features[:, 2]).all()

    def test_determinism_bit_identical(self):
        data = make_regression(30, 2, seed=6)
        a = draw_replacement_table(data, 1, K=5, seed=123, mode="resample")
        b = draw_replacement_table(data, 1, K=5, seed=123, mode="resample")
        np.testing.assert_array_equal(a.values, b.values)
        c = draw_replacement_table(data, 1, K=5, seed=124, mode="resample")
        assert not np.array_equal(a.values, c.values)

    def test_index_and_k_validation(self):
        data = two_point_dataset()
        with pytest.raises(IndexError):
            draw_replacement_table(data, 1, K=2, seed=0)
        with pytest.raises(InvalidArgumentError, match="K"):
            draw_replacement_table(data, 0, K=0, seed=0)
        with pytest.raises(InvalidArgumentError, match="mode"):
            draw_replacement_table(data, 0, K=2, seed=0, mode="bootstrap")


class TestAblateRow:
    def test_replaces_one_position(self):
        out = ablate_row(np.array([1.0, 2.0, 3.0]), 1, 9.0)
        np.testing.assert_array_equal(out, [1.0, 9.0, 3.0])

    def test_input_not_modified(self):
        row = np.array([1.0, 2.0, 3.0])
        ablate_row(row, 0, -1.0)
        np.testing.assert_array_equal(row, [1.0, 2.0, 3.0])

    def test_identity_when_value_unchanged(self):
        row = np.array([4.0, 5.0])
        np.testing.assert_array_equal(ablate_row(row, 1, 5.0), row)

    def test_involution_recovers_input(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            row = rng.normal(size=6)
            i = int(rng.integers(0, 6))
            z = float(rng.normal())
            back = ablate_row(ablate_row(row, i, z), i, row[i])
            np.testing.assert_array_equal(back, row)

    def test_index_error(self):
        with pytest.raises(IndexError):
            ablate_row(np.array([1.0]), 1, 0.0)


class TestComputeDeltaMatrix:
    def test_constant_model_all_zero(self):
        data = make_regression(15, 3, seed=7)
        model = fit_constant(data)
        table = draw_replacement_table(data, 1, K=4, seed=2, mode="resample")
        grid = compute_delta_matrix(model, data, LossSpec("squared"), table)
        assert np.all(grid.deltas == 0.0)

    def test_exact_two_point_hand_grid(self):
        # rows (0,y=0),(1,y=1); model f(x)=x; squared loss; exact mode
        data = two_point_dataset()
        table = draw_replacement_table(data, 0, K=2, seed=0, mode="exact")
        grid = compute_delta_matrix(FeatureReader(0), data, LossSpec("squared"), table)
        np.testing.assert_array_equal(grid.deltas, [[0.0, 1.0], [1.0, 0.0]])

    def test_ignored_feature_gives_exact_zeros(self):
        data = make_regression(25, 3, seed=8)
        model = FeatureReader(0)  # reads only feature 0
        table = draw_replacement_table(data, 1, K=6, seed=3, mode="resample")
        grid = compute_delta_matrix(model, data, LossSpec("squared"), table)
        assert np.all(grid.deltas == 0.0)  # exactly, not approximately

    def test_determinism(self):
        data = make_regression(20, 2, seed=9)
        model = FeatureReader(1)
        loss = LossSpec("absolute")
        t1 = draw_replacement_table(data, 0, K=3, seed=11, mode="permute")
        t2 = draw_replacement_table(data, 0, K=3, seed=11, mode="permute")
        g1 = compute_delta_matrix(model, data, loss, t1)
        g2 = compute_delta_matrix(model, data, loss, t2)
        np.testing.assert_array_equal(g1.deltas, g2.deltas)

    def test_sign_convention_matches_independent_risks(self):
        # mean(deltas) == risk(ablated) - risk(original), computed separately
        data = make_regression(30, 2, seed=10)
        model = FeatureReader(0)
        loss = LossSpec("squared")
        table = draw_replacement_table(data, 0, K=1, seed=4, mode="permute")

        grid = compute_delta_matrix(model, data, loss, table)

        ablated_features = data.features.copy()
        ablated_features[:, 0] = table.replicate_block(0)
        ablated_data = Dataset(
            features=ablated_features,
            target=data.target,
            feature_names=data.feature_names,
        )
        ablated_risk = fixed_data_risk(model, ablated_data, loss).risk
        original_risk = fixed_data_risk(model, data, loss).risk

        assert math.fsum(grid.deltas.ravel()) / grid.deltas.size == pytest.approx(
            ablated_risk - original_risk, rel=1e-12, abs=1e-15
        )

    def test_baseline_risk_recorded(self):
        data = make_regression(12, 2, seed=12)
        model = FeatureReader(0)
        loss = LossSpec("squared")
        table = draw_replacement_table(data, 1, K=2, seed=5)
        grid = compute_delta_matrix(model, data, loss, table)
        assert grid.baseline_risk == fixed_data_risk(model, data, loss).risk

    def test_foreign_table_rejected(self):
        data = make_regression(10, 2, seed=13)
        other = make_regression(10, 2, seed=14)
        table = draw_replacement_table(other, 0, K=2, seed=6)
        with pytest.raises(InvalidArgumentError, match="column"):
            compute_delta_matrix(FeatureReader(0), data, LossSpec("squared"), table)
