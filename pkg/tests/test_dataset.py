import numpy as np
import pytest

from bandsel import (
    ClassThresholds,
    NitrogenLabel,
    ParseError,
    ValidationError,
    assign_classes,
    load_labels,
    load_spectra,
    merge_sensors,
    remove_outliers,
    write_labels_csv,
    write_spectra_csv,
)
from conftest import make_table


def write(tmp_path, text, name="spectra.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadSpectra:
    def test_basic_round_trip(self, tmp_path):
        path = write(
            tmp_path,
            "sample_id,vine_id,400.0,400.4,400.8\n"
            "a,v1,0.1,0.2,0.3\n"
            "b,v1,0.4,0.5,0.6\n",
        )
        table = load_spectra(path)
        assert table.sample_ids == ("a", "b")
        assert table.vine_ids == ("v1", "v1")
        assert np.allclose(table.wavelengths_nm, [400.0, 400.4, 400.8])
        assert np.allclose(table.reflectance, [[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])

    def test_columns_sorted_ascending(self, tmp_path):
        path = write(
            tmp_path,
            "sample_id,vine_id,500,400\na,v1,0.9,0.1\n",
        )
        table = load_spectra(path)
        assert np.allclose(table.wavelengths_nm, [400.0, 500.0])
        assert np.allclose(table.reflectance, [[0.1, 0.9]])

    def test_nan_cell_is_parse_error_with_location(self, tmp_path):
        path = write(
            tmp_path,
            "sample_id,vine_id,400,500\na,v1,0.1,NaN\n",
        )
        with pytest.raises(ParseError, match=r"row 2.*'500'"):
            load_spectra(path)

    def test_text_cell_is_parse_error(self, tmp_path):
        path = write(
            tmp_path,
            "sample_id,vine_id,400,500\na,v1,0.1,0.2\nb,v1,oops,0.2\n",
        )
        with pytest.raises(ParseError, match=r"row 3.*'400'"):
            load_spectra(path)

    def test_bad_header_names_offending_column(self, tmp_path):
        path = write(tmp_path, "sample_id,vine_id,400,green\na,v1,0.1,0.2\n")
        with pytest.raises(ParseError, match="'green'"):
            load_spectra(path)

    def test_missing_id_columns(self, tmp_path):
        path = write(tmp_path, "id,vine,400,500\na,v1,0.1,0.2\n")
        with pytest.raises(ParseError, match="sample_id"):
            load_spectra(path)

    def test_duplicate_sample_id(self, tmp_path):
        path = write(
            tmp_path,
            "sample_id,vine_id,400\na,v1,0.1\na,v2,0.2\n",
        )
        with pytest.raises(ValidationError, match="duplicate sample_id"):
            load_spectra(path)

    def test_duplicate_wavelength_column(self, tmp_path):
        path = write(tmp_path, "sample_id,vine_id,400,400\na,v1,0.1,0.2\n")
        with pytest.raises(ParseError, match="duplicate wavelength"):
            load_spectra(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError, match="not found"):
            load_spectra(tmp_path / "nope.csv")

    def test_write_then_load_is_identity(self, tmp_path):
        rng = np.random.default_rng(0)
        table = make_table(rng.random((3, 4)), [400.0, 410.5, 420.0, 431.25])
        path = tmp_path / "round.csv"
        write_spectra_csv(table, path)
        back = load_spectra(path)
        assert back.sample_ids == table.sample_ids
        assert np.array_equal(back.wavelengths_nm, table.wavelengths_nm)
        assert np.array_equal(back.reflectance, table.reflectance)


class TestLoadLabels:
    def test_round_trip(self, tmp_path):
        labels = [NitrogenLabel("v1", 2.5), NitrogenLabel("v2", 3.41)]
        path = tmp_path / "labels.csv"
        write_labels_csv(labels, path)
        assert load_labels(path) == labels

    def test_duplicate_vine(self, tmp_path):
        path = write(tmp_path, "vine_id,nitrogen_pct\nv1,2.5\nv1,2.6\n", "l.csv")
        with pytest.raises(ValidationError, match="duplicate"):
            load_labels(path)

    def test_non_numeric_value(self, tmp_path):
        path = write(tmp_path, "vine_id,nitrogen_pct\nv1,low\n", "l.csv")
        with pytest.raises(ParseError, match="row 2"):
            load_labels(path)


class TestMergeSensors:
    def make_pair(self):
        vis = make_table(
            np.arange(10.0).reshape(2, 5),
            [395.0, 400.0, 650.0, 900.0, 905.0],
            sample_ids=["a", "b"],
            vine_ids=["v1", "v2"],
        )
        nir = make_table(
            np.arange(4.0).reshape(2, 2) + 100,
            [936.0, 942.0],
            sample_ids=["a", "b"],
            vine_ids=["v1", "v2"],
        )
        return vis, nir

    def test_noisy_edges_clipped(self):
        vis, nir = self.make_pair()
        merged = merge_sensors(vis, nir)
        assert np.allclose(merged.wavelengths_nm, [400.0, 650.0, 900.0, 936.0, 942.0])
        assert np.allclose(merged.reflectance[0], [1.0, 2.0, 3.0, 100.0, 101.0])

    def test_no_clipping_concatenates(self):
        vis = make_table([[0.1, 0.2]], [500.0, 600.0], sample_ids=["a"], vine_ids=["v"])
        nir = make_table([[0.3]], [1000.0], sample_ids=["a"], vine_ids=["v"])
        merged = merge_sensors(vis, nir)
        assert merged.n_wavelengths == 3

    def test_missing_sample_id(self):
        vis, nir = self.make_pair()
        with pytest.raises(ValidationError, match="sample ids differ"):
            merge_sensors(vis, nir.take_rows([0]))

    def test_rows_aligned_by_id_not_order(self):
        vis, nir = self.make_pair()
        nir_swapped = nir.take_rows([1, 0])
        merged = merge_sensors(vis, nir_swapped)
        assert np.allclose(merged.reflectance[0, -2:], [100.0, 101.0])

    def test_overlap_after_clipping(self):
        vis = make_table([[0.1, 0.2]], [500.0, 950.0], sample_ids=["a"], vine_ids=["v"])
        nir = make_table([[0.3]], [936.0], sample_ids=["a"], vine_ids=["v"])
        with pytest.raises(ValidationError, match="overlap"):
            merge_sensors(vis, nir, vis_lo_nm=400.0, vis_hi_nm=960.0)

    def test_output_strictly_increasing(self):
        vis, nir = self.make_pair()
        merged = merge_sensors(vis, nir)
        assert (np.diff(merged.wavelengths_nm) > 0).all()


class TestRemoveOutliers:
    def test_single_extreme_sample_removed(self):
        # a z-score within a sample of n is bounded by sqrt(n-1), so the
        # clean group must be large enough for 3 sigma to be reachable
        rng = np.random.default_rng(1)
        x = 0.5 + 0.01 * rng.standard_normal((30, 3))
        x[4, 1] = 0.5 + 0.2
        table = make_table(x, [400.0, 500.0, 600.0])
        kept, removed = remove_outliers(table)
        assert removed == ("s4",)
        assert kept.n_samples == 29

    def test_identical_samples_keep_everything(self):
        table = make_table(np.full((6, 2), 0.3), [400.0, 500.0])
        kept, removed = remove_outliers(table)
        assert removed == ()
        assert kept.n_samples == 6

    def test_matches_hand_computed_column_statistics(self):
        # one sample displaced on the second wavelength only; the expected
        # removal set comes from recomputing the column rule with plain loops
        rng = np.random.default_rng(7)
        x = 0.4 + 0.005 * rng.standard_normal((20, 2))
        x[3, 1] += 0.06
        expected = set()
        for j in range(2):
            col = [x[i][j] for i in range(20)]
            mu = sum(col) / 20
            sigma = (sum((v - mu) ** 2 for v in col) / 20) ** 0.5
            for i in range(20):
                if abs(col[i] - mu) > 3.0 * sigma:
                    expected.add(f"s{i}")
        assert expected == {"s3"}
        table = make_table(x, [400.0, 500.0])
        _, removed = remove_outliers(table, z_threshold=3.0)
        assert set(removed) == expected

    def test_single_pass_second_run_removes_nothing(self):
        rng = np.random.default_rng(2)
        x = 0.5 + 0.01 * rng.standard_normal((30, 4))
        x[0] += 0.2
        table = make_table(x, [400.0, 500.0, 600.0, 700.0])
        kept, removed = remove_outliers(table)
        assert removed == ("s0",)
        kept2, removed2 = remove_outliers(kept)
        assert removed2 == ()
        assert kept2.n_samples == kept.n_samples

    def test_all_removed_is_error(self):
        table = make_table([[0.0, 1.0], [1.0, 0.0]], [400.0, 500.0])
        with pytest.raises(ValidationError, match="every sample"):
            remove_outliers(table, z_threshold=0.5)


class TestAssignClasses:
    def table_for(self, nitrogen_by_vine):
        vines = list(nitrogen_by_vine)
        table = make_table(
            np.linspace(0.1, 0.9, len(vines) * 2).reshape(len(vines), 2),
            [400.0, 500.0],
            vine_ids=vines,
        )
        labels = [NitrogenLabel(v, n) for v, n in nitrogen_by_vine.items()]
        return table, labels

    def test_region_assignment(self):
        table, labels = self.table_for({"a": 2.50, "b": 3.37, "c": 3.00, "d": 2.60, "e": 3.50})
        ds = assign_classes(table, labels)
        assert ds.x_extreme.vine_ids == ("a", "e")
        assert list(ds.y_extreme) == [0, 1]
        assert ds.x_inner.vine_ids == ("b", "d")
        assert list(ds.y_inner) == [1, 0]
        assert ds.n_excluded_middle == 1

    @pytest.mark.parametrize(
        "nitrogen,region,label",
        [
            (2.55, "extreme", 0),
            (2.66, "excluded", None),
            (3.35, "excluded", None),
            (3.4, "extreme", 1),
            (2.56, "inner", 0),
            (3.39, "inner", 1),
        ],
    )
    def test_boundary_values(self, nitrogen, region, label):
        table, labels = self.table_for({"x": nitrogen, "lo": 2.0, "hi": 3.9})
        ds = assign_classes(table, labels)
        if region == "extreme":
            assert "x" in ds.x_extreme.vine_ids
            assert ds.y_extreme[ds.x_extreme.vine_ids.index("x")] == label
        elif region == "inner":
            assert "x" in ds.x_inner.vine_ids
            assert ds.y_inner[ds.x_inner.vine_ids.index("x")] == label
        else:
            assert "x" not in ds.x_extreme.vine_ids + ds.x_inner.vine_ids
            assert ds.n_excluded_middle == 1

    def test_partition_property(self):
        rng = np.random.default_rng(0)
        nitrogen = {f"v{i}": float(rng.uniform(1.5, 4.5)) for i in range(40)}
        table, labels = self.table_for(nitrogen)
        ds = assign_classes(table, labels)
        total = ds.x_extreme.n_samples + ds.x_inner.n_samples + ds.n_excluded_middle
        assert total == table.n_samples

    def test_missing_vine_label_lists_ids(self):
        table, labels = self.table_for({"a": 2.5, "b": 3.5})
        with pytest.raises(ValidationError, match="b"):
            assign_classes(table, labels[:1])

    def test_labels_replicated_per_leaf(self):
        table = make_table(
            np.linspace(0, 1, 8).reshape(4, 2),
            [400.0, 500.0],
            vine_ids=["v1", "v1", "v2", "v2"],
        )
        labels = [NitrogenLabel("v1", 2.0), NitrogenLabel("v2", 3.9)]
        ds = assign_classes(table, labels)
        assert list(ds.y_extreme) == [0, 0, 1, 1]

    def test_threshold_validation(self):
        with pytest.raises(ValidationError):
            ClassThresholds(low_max=2.7, inner_low_max=2.66)
