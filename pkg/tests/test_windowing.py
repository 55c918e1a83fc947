import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandsel import (
    CorrelationWindower,
    FeatureNormalizer,
    ValidationError,
    apply_normalizer,
    apply_windows,
    build_windows,
    correlation_matrix,
    fit_normalizer,
)
from conftest import make_table


class TestCorrelationMatrix:
    def test_duplicated_column_has_unit_correlation(self):
        rng = np.random.default_rng(0)
        col = rng.random(20)
        corr = correlation_matrix(np.column_stack([col, col, rng.random(20)]))
        assert corr[0, 1] == pytest.approx(1.0)

    def test_negated_column(self):
        rng = np.random.default_rng(1)
        col = rng.random(20)
        corr = correlation_matrix(np.column_stack([col, -col]))
        assert corr[0, 1] == pytest.approx(-1.0)

    def test_hand_computed_pearson(self):
        # x=(1,2,3,4), y=(1,3,2,4): cov=1.0, var=1.25 each, rho=0.8
        corr = correlation_matrix(np.array([[1.0, 1.0], [2.0, 3.0], [3.0, 2.0], [4.0, 4.0]]))
        assert corr[0, 1] == pytest.approx(0.8, abs=1e-12)

    def test_properties(self):
        rng = np.random.default_rng(2)
        corr = correlation_matrix(rng.random((15, 6)))
        assert np.array_equal(corr, corr.T)
        assert np.allclose(np.diag(corr), 1.0)
        assert corr.min() >= -1.0 and corr.max() <= 1.0

    def test_zero_variance_column_names_wavelength(self):
        x = np.column_stack([np.random.default_rng(3).random(10), np.full(10, 0.2)])
        with pytest.raises(ValidationError, match="500"):
            correlation_matrix(x, feature_names=["400", "500"])

    def test_needs_two_samples(self):
        with pytest.raises(ValidationError, match="2 samples"):
            correlation_matrix(np.array([[1.0, 2.0]]))


def brute_force_windows(corr, threshold):
    """Independent re-application of the grouping rule, one prefix at a time."""
    d = corr.shape[0]
    groups = []
    current = [0]
    for j in range(1, d):
        if all(corr[j, m] > threshold for m in current):
            current.append(j)
        else:
            groups.append(current)
            current = [j]
    groups.append(current)
    return groups


class TestBuildWindows:
    def test_block_structure(self):
        corr = np.eye(4)
        corr[np.ix_([0, 1, 2], [0, 1, 2])] = 1.0
        wm = build_windows(corr, [400.0, 401.0, 402.0, 500.0], 0.99)
        assert [len(w.member_indices) for w in wm.windows] == [3, 1]

    def test_degenerate_threshold_gives_singletons(self):
        rng = np.random.default_rng(4)
        corr = correlation_matrix(rng.random((30, 5)))
        wm = build_windows(corr, [1.0, 2.0, 3.0, 4.0, 5.0], threshold_rho=0.999999)
        assert len(wm.windows) == 5

    def test_complete_linkage_boundary_matches_brute_force(self):
        # columns 0..3 mutually above threshold, column 4 fails against column 0
        corr = np.full((6, 6), 0.995)
        np.fill_diagonal(corr, 1.0)
        for j in (4, 5):
            for m in (0, 1):
                corr[j, m] = corr[m, j] = 0.98
        wl = [400.0, 400.4, 400.8, 401.2, 401.6, 402.0]
        wm = build_windows(corr, wl, 0.99)
        expected = brute_force_windows(corr, 0.99)
        assert [list(w.member_indices) for w in wm.windows] == expected
        assert expected[0] == [0, 1, 2, 3]

    def test_brute_force_agreement_on_random_ar_data(self):
        rng = np.random.default_rng(5)
        n, d = 60, 40
        noise = rng.standard_normal((n, d))
        x = np.cumsum(noise * 0.05, axis=1) + rng.standard_normal((n, 1))
        corr = correlation_matrix(x)
        wm = build_windows(corr, np.arange(1.0, d + 1), 0.9)
        assert [list(w.member_indices) for w in wm.windows] == brute_force_windows(corr, 0.9)

    def test_within_window_pairs_exceed_threshold(self):
        rng = np.random.default_rng(6)
        n, d = 80, 30
        x = np.cumsum(rng.standard_normal((n, d)) * 0.1, axis=1) + 5 * rng.standard_normal((n, 1))
        corr = correlation_matrix(x)
        wm = build_windows(corr, np.arange(1.0, d + 1), 0.95)
        for w in wm.windows:
            idx = list(w.member_indices)
            for i in idx:
                for j in idx:
                    if i != j:
                        assert corr[i, j] > 0.95

    def test_k_block_duplicated_columns_give_k_windows(self):
        rng = np.random.default_rng(7)
        n = 50
        blocks = []
        widths = [3, 1, 4, 2, 5]
        for width in widths:
            col = rng.standard_normal(n)
            blocks.append(np.tile(col[:, None], (1, width)))
        x = np.hstack(blocks)
        corr = correlation_matrix(x)
        wm = build_windows(corr, np.arange(1.0, x.shape[1] + 1), 0.99)
        assert len(wm.windows) == len(widths)

    def test_midpoint_and_coverage_invariants(self):
        rng = np.random.default_rng(8)
        x = np.cumsum(rng.standard_normal((40, 25)) * 0.2, axis=1)
        wl = np.linspace(400, 500, 25)
        wm = build_windows(correlation_matrix(x), wl, 0.9)
        covered = [i for w in wm.windows for i in w.member_indices]
        assert covered == list(range(25))
        for w in wm.windows:
            assert w.midpoint_nm == (w.first_nm + w.last_nm) / 2
            assert w.first_nm == wl[w.member_indices[0]]
            assert w.last_nm == wl[w.member_indices[-1]]

    def test_json_round_trip(self):
        from bandsel import WindowMap

        corr = np.eye(3)
        wm = build_windows(corr, [400.0, 500.0, 600.0], 0.99)
        back = WindowMap.from_json_dict(wm.to_json_dict())
        assert back == wm


class TestApplyWindows:
    def test_window_mean(self):
        corr = np.ones((2, 2))
        wm = build_windows(corr, [400.0, 402.0], 0.99)
        out = apply_windows(np.array([[0.10, 0.30]]), wm)
        assert out.shape == (1, 1)
        assert out[0, 0] == pytest.approx(0.20)
        assert wm.feature_names == ("401",)

    def test_singleton_window_is_identity(self):
        corr = np.eye(2)
        wm = build_windows(corr, [400.0, 500.0], 0.99)
        x = np.array([[0.1, 0.7], [0.4, 0.2]])
        assert np.array_equal(apply_windows(x, wm), x)

    def test_training_map_applies_to_test_table(self):
        rng = np.random.default_rng(9)
        wl = np.linspace(400, 420, 10)
        train = make_table(np.cumsum(rng.standard_normal((30, 10)) * 0.1, axis=1), wl)
        test = make_table(rng.random((5, 10)), wl)
        wm = build_windows(correlation_matrix(train.reflectance), wl, 0.9)
        out = apply_windows(test, wm)
        assert out.shape == (5, len(wm.windows))

    def test_row_permutation_commutes(self):
        rng = np.random.default_rng(10)
        x = rng.random((8, 4))
        wm = build_windows(np.ones((4, 4)), [1.0, 2.0, 3.0, 4.0], 0.99)
        perm = rng.permutation(8)
        assert np.array_equal(apply_windows(x[perm], wm), apply_windows(x, wm)[perm])

    def test_width_mismatch(self):
        wm = build_windows(np.eye(2), [400.0, 500.0], 0.99)
        with pytest.raises(ValidationError, match="columns"):
            apply_windows(np.ones((2, 3)), wm)

    def test_wavelength_mismatch(self):
        wm = build_windows(np.eye(2), [400.0, 500.0], 0.99)
        with pytest.raises(ValidationError, match="grid"):
            apply_windows(np.ones((2, 2)), wm, wavelengths_nm=[410.0, 500.0])


class TestNormalizer:
    def test_two_point_column(self):
        norm = fit_normalizer(np.array([[1.0], [3.0]]), ["a"])
        assert norm.means[0] == pytest.approx(2.0)
        assert norm.stds[0] == pytest.approx(1.0)

    def test_training_matrix_standardized_exactly(self):
        rng = np.random.default_rng(11)
        x = rng.random((50, 4)) * 3 + 1
        norm = fit_normalizer(x)
        out = apply_normalizer(norm, x)
        assert np.abs(out.mean(axis=0)).max() < 1e-12
        assert np.abs(out.std(axis=0) - 1).max() < 1e-12

    def test_already_standardized_is_stable(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((100, 3))
        x = (x - x.mean(0)) / x.std(0)
        norm = fit_normalizer(x)
        assert np.abs(norm.means).max() < 1e-12
        assert np.abs(norm.stds - 1).max() < 1e-12

    def test_constant_column_is_error(self):
        with pytest.raises(ValidationError, match="zero-variance"):
            fit_normalizer(np.array([[1.0, 2.0], [1.0, 3.0]]), ["a", "b"])

    def test_shifted_test_matrix_mean(self):
        # shifting by +1 moves the normalized mean to exactly 1/sigma
        rng = np.random.default_rng(13)
        x = rng.random((40, 3)) * 2
        norm = fit_normalizer(x)
        shifted = apply_normalizer(norm, x + 1.0)
        expected = apply_normalizer(norm, x).mean(axis=0) + 1.0 / norm.stds
        assert np.allclose(shifted.mean(axis=0), expected, atol=1e-12)

    def test_name_mismatch(self):
        norm = fit_normalizer(np.array([[1.0], [2.0]]), ["a"])
        with pytest.raises(ValidationError, match="names"):
            apply_normalizer(norm, np.array([[1.0], [2.0]]), feature_names=["b"])


class TestEstimators:
    def test_windower_transform_matches_function(self):
        rng = np.random.default_rng(14)
        wl = np.linspace(400, 410, 6)
        x = np.cumsum(rng.standard_normal((30, 6)) * 0.1, axis=1)
        windower = CorrelationWindower(threshold_rho=0.9).fit(x, wavelengths_nm=wl)
        assert np.array_equal(windower.transform(x), apply_windows(x, windower.window_map_))
        assert list(windower.get_feature_names_out()) == list(windower.window_map_.feature_names)
        assert windower.get_params() == {"threshold_rho": 0.9}

    def test_normalizer_estimator(self):
        x = np.array([[1.0, 5.0], [3.0, 9.0]])
        est = FeatureNormalizer().fit(x)
        assert np.allclose(est.transform(x).mean(axis=0), 0.0, atol=1e-12)

    def test_unfitted_errors(self):
        with pytest.raises(ValidationError, match="not fitted"):
            CorrelationWindower().transform(np.ones((2, 2)))


@settings(max_examples=25, deadline=None)
@given(
    widths=st.lists(st.integers(min_value=1, max_value=4), min_size=1, max_size=6),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_window_coverage_property(widths, seed):
    rng = np.random.default_rng(seed)
    blocks = [np.tile(rng.standard_normal(30)[:, None], (1, w)) for w in widths]
    x = np.hstack(blocks) + 1e-9 * rng.standard_normal((30, sum(widths)))
    corr = correlation_matrix(x)
    wm = build_windows(corr, np.arange(1.0, x.shape[1] + 1), 0.99)
    covered = [i for w in wm.windows for i in w.member_indices]
    assert covered == list(range(x.shape[1]))
    assert len(wm.windows) == len(widths)
