from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krigpr.data import (
    Dataset,
    fit_pca,
    load_dataset,
    load_folds,
    make_folds,
    pca_reduce,
    write_dataset,
)
from krigpr.errors import (
    DegenerateInput,
    DuplicateLocation,
    MissingValue,
    ShapeMismatch,
    TooFewSamples,
)

SCHEMA = {"x": "x", "y": "y", "targets": ["soc"], "features": ["f1"]}


def write_csv(path, text):
    path.write_text(text)
    return path


class TestLoadDataset:
    def test_three_row_file(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "x,y,soc,f1\n0,0,1.5,2\n1,0,2.5,3\n0,1,3.5,4\n")
        ds = load_dataset(p, SCHEMA, dataset_id="toy")
        assert ds.n == 3
        assert ds.p == 1
        assert ds.targets["soc"][2] == 3.5

    def test_duplicate_coordinates(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "x,y,soc,f1\n0,0,1,2\n0,0,2,3\n1,1,3,4\n")
        with pytest.raises(DuplicateLocation):
            load_dataset(p, SCHEMA)

    def test_too_few_rows(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "x,y,soc,f1\n0,0,1,2\n")
        with pytest.raises(TooFewSamples):
            load_dataset(p, SCHEMA)

    def test_missing_cell(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "x,y,soc,f1\n0,0,1,2\n1,0,,3\n0,1,3,4\n")
        with pytest.raises(MissingValue):
            load_dataset(p, SCHEMA)

    def test_missing_coordinate_cell(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "x,y,soc,f1\n0,0,1,2\n,0,2,3\n0,1,3,4\n")
        with pytest.raises(MissingValue):
            load_dataset(p, SCHEMA)

    def test_non_numeric_cell(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "x,y,soc,f1\n0,0,1,2\n1,0,abc,3\n0,1,3,4\n")
        with pytest.raises(MissingValue):
            load_dataset(p, SCHEMA)

    def test_unknown_column(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "x,y,soc,f1\n0,0,1,2\n1,0,2,3\n")
        with pytest.raises(ShapeMismatch):
            load_dataset(p, {**SCHEMA, "features": ["nope"]})

    def test_metadata_carried(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "x,y,soc,f1\n0,0,1,2\n1,0,2,3\n")
        ds = load_dataset(p, SCHEMA, metadata={"pss_count": 3})
        assert ds.pss_count == 3

    def test_round_trip_bit_for_bit(self, tmp_path, rng):
        n = 25
        locs = rng.uniform(0, 100, size=(n, 2))
        ds = Dataset(
            id="rt",
            locations=locs,
            targets={"soc": rng.standard_normal(n) * 1e-3},
            features=rng.standard_normal((n, 3)) * np.array([1e-8, 1.0, 1e6]),
            feature_names=("a", "b", "c"),
        )
        out = tmp_path / "rt.csv"
        write_dataset(ds, out)
        back = load_dataset(
            out,
            {"x": "x", "y": "y", "targets": ["soc"], "features": ["a", "b", "c"]},
            dataset_id="rt",
        )
        np.testing.assert_array_equal(back.locations, ds.locations)
        np.testing.assert_array_equal(back.targets["soc"], ds.targets["soc"])
        np.testing.assert_array_equal(back.features, ds.features)


class TestPca:
    def test_full_rank_identity_case(self):
        x = np.array([[2.0, 0.0], [-2.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        scores = pca_reduce(x, 2)
        assert scores.shape == (4, 2)
        # Orthogonal input: variance is preserved by the rotation.
        assert np.var(scores, ddof=1) * 2 == pytest.approx(np.var(x, ddof=1) * 2)
        np.testing.assert_allclose(
            np.sort(np.var(scores, axis=0, ddof=1))[::-1],
            np.sort(np.var(x, axis=0, ddof=1))[::-1],
        )

    def test_rank_one_matrix_keeps_single_component(self):
        # col2 = 2 * col1: the 2x2 covariance has one non-zero eigenvalue
        # (worked by hand: eigenvalues 5*var(c1) and 0), so one component
        # survives no matter how many are requested.
        c1 = np.array([1.0, 2.0, 3.0, 4.0])
        x = np.column_stack([c1, 2.0 * c1])
        scores = pca_reduce(x, 10)
        assert scores.shape == (4, 1)
        model = fit_pca(x, 10)
        assert model.k == 1
        assert model.explained_variance[0] == pytest.approx(
            5.0 * np.var(c1, ddof=1)
        )

    def test_requested_components_cap(self, rng):
        x = rng.standard_normal((50, 30))
        assert pca_reduce(x, 10).shape == (50, 10)

    def test_constant_matrix_rejected(self):
        with pytest.raises(DegenerateInput):
            pca_reduce(np.full((5, 3), 2.0), 2)

    def test_reconstruction_with_all_components(self, rng):
        x = rng.standard_normal((40, 6))
        model = fit_pca(x, 6)
        recon = model.inverse_transform(model.transform(x))
        np.testing.assert_allclose(recon, x, rtol=1e-8, atol=1e-10)

    def test_sign_convention_deterministic(self, rng):
        x = rng.standard_normal((30, 4))
        a = fit_pca(x, 4)
        b = fit_pca(-x[::-1] * -1.0, 4)  # same rows, roundabout construction
        for row_a in a.components:
            assert row_a[np.argmax(np.abs(row_a))] > 0
        np.testing.assert_allclose(np.abs(a.components), np.abs(b.components))

    def test_descending_explained_variance(self, rng):
        x = rng.standard_normal((60, 5)) * np.array([5.0, 3.0, 2.0, 1.0, 0.5])
        model = fit_pca(x, 5)
        assert np.all(np.diff(model.explained_variance) <= 1e-12)

    def test_train_fit_test_transform(self, rng):
        train = rng.standard_normal((30, 8))
        test = rng.standard_normal((10, 8))
        model = fit_pca(train, 3)
        assert model.transform(test).shape == (10, 3)


class TestFolds:
    def test_singletons_when_k_equals_n(self):
        fa = make_folds(10, 10, seed=1)
        sizes = np.bincount(fa.fold_of)
        np.testing.assert_array_equal(sizes, np.ones(10, dtype=int))

    def test_determinism(self):
        a = make_folds(10, 3, seed=99)
        b = make_folds(10, 3, seed=99)
        np.testing.assert_array_equal(a.fold_of, b.fold_of)

    def test_exact_division(self):
        fa = make_folds(250, 10, seed=0)
        np.testing.assert_array_equal(np.bincount(fa.fold_of), np.full(10, 25))

    def test_k_larger_than_n(self):
        with pytest.raises(TooFewSamples):
            make_folds(5, 6, seed=0)

    @given(
        n=st.integers(4, 200),
        k=st.integers(2, 12),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=100, deadline=None)
    def test_partition_property(self, n, k, seed):
        if k > n:
            return
        fa = make_folds(n, k, seed)
        sizes = np.bincount(fa.fold_of, minlength=k)
        assert sizes.sum() == n
        assert sizes.min() >= 1
        assert sizes.max() - sizes.min() <= 1
        # Union of fold index sets is [0, n), intersections empty by
        # construction of fold_of as a single array.
        all_idx = np.concatenate([fa.test_indices(f) for f in range(k)])
        assert np.array_equal(np.sort(all_idx), np.arange(n))

    def test_load_folds(self, tmp_path):
        p = tmp_path / "folds.txt"
        p.write_text("0\n1\n2\n0\n1\n2\n")
        fa = load_folds(p)
        assert fa.k == 3
        assert fa.seed == "external"
        np.testing.assert_array_equal(fa.fold_of, [0, 1, 2, 0, 1, 2])

    def test_load_folds_with_gap_rejected(self, tmp_path):
        p = tmp_path / "folds.txt"
        p.write_text("0\n2\n0\n2\n")
        with pytest.raises(ShapeMismatch):
            load_folds(p)
