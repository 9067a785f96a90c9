from __future__ import annotations

import numpy as np
import pytest

from conftest import oracle_ok_solve
from krigpr.errors import SingularSystem, TooFewSamples
from krigpr.kriging import loo_ok_features, ok_predict
from krigpr.variogram import VariogramModel


def model(fam="spherical", nugget=0.0, psill=1.0, rng=2.0):
    return VariogramModel(fam, nugget, psill, rng)


class TestOkPredict:
    def test_symmetric_two_point_weights(self):
        preds = ok_predict(
            [[0.0, 0.0], [2.0, 0.0]], [1.0, 5.0], model(), [[1.0, 0.0]]
        )
        np.testing.assert_allclose(preds[0].weights, [0.5, 0.5], atol=1e-10)
        assert preds[0].mean == pytest.approx(3.0)

    def test_exact_interpolation_at_training_point(self):
        locs = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
        preds = ok_predict(locs, [1.0, 3.0, 2.0], model(), [[1.0, 0.0]])
        assert preds[0].mean == pytest.approx(3.0, abs=1e-8)
        assert preds[0].variance == pytest.approx(0.0, abs=1e-8)

    def test_against_independent_dense_solve(self):
        # Three points, spherical(0, 1, 2), query inside the triangle.
        locs = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
        vals = [1.0, 3.0, 2.0]
        preds = ok_predict(locs, vals, model(), [[0.4, 0.3]])
        mean, var, psi, weights = oracle_ok_solve(
            locs, vals, "spherical", 0.0, 1.0, 2.0, [0.4, 0.3]
        )
        assert preds[0].mean == pytest.approx(mean, abs=1e-10)
        assert preds[0].variance == pytest.approx(var, abs=1e-10)
        assert preds[0].lagrange == pytest.approx(psi, abs=1e-10)
        np.testing.assert_allclose(preds[0].weights, weights, atol=1e-10)

    def test_weights_sum_to_one_random_configs(self, rng):
        for _ in range(50):
            n = int(rng.integers(5, 30))
            locs = rng.uniform(0, 10, size=(n, 2))
            vals = rng.standard_normal(n)
            fam = ["spherical", "exponential"][int(rng.integers(0, 2))]
            m = model(fam, float(rng.uniform(0, 0.3)), float(rng.uniform(0.2, 1.0)),
                      float(rng.uniform(2.0, 12.0)))
            preds = ok_predict(locs, vals, m, rng.uniform(0, 10, size=(3, 2)))
            for p in preds:
                assert p.weights.sum() == pytest.approx(1.0, abs=1e-8)
                assert p.variance >= 0.0

    def test_translation_equivariance(self, rng):
        locs = rng.uniform(0, 10, size=(15, 2))
        vals = rng.standard_normal(15)
        queries = rng.uniform(0, 10, size=(4, 2))
        m = model("exponential", 0.1, 0.9, 5.0)
        base = ok_predict(locs, vals, m, queries)
        shifted = ok_predict(locs, vals + 7.25, m, queries)
        for p, q in zip(base, shifted):
            assert q.mean - p.mean == pytest.approx(7.25, abs=1e-8)
            assert q.variance == pytest.approx(p.variance, abs=1e-8)

    def test_coincident_training_points_rejected(self):
        locs = [[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]
        with pytest.raises(SingularSystem):
            ok_predict(locs, [1.0, 1.0, 2.0], model(), [[0.5, 0.5]])

    def test_too_few_training_points(self):
        with pytest.raises(TooFewSamples):
            ok_predict([[0.0, 0.0]], [1.0], model(), [[0.5, 0.5]])

    def test_zero_sill_model_returns_training_mean(self):
        locs = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
        m = VariogramModel("spherical", 0.0, 0.0, 1.0)
        preds = ok_predict(locs, [2.0, 4.0, 6.0], m, [[5.0, 5.0]])
        assert preds[0].mean == pytest.approx(4.0)
        assert preds[0].variance == 0.0


class TestLooOkFeatures:
    def test_symmetric_middle_point(self):
        # Middle of three equally spaced collinear points: the two outer
        # points are interchangeable, so their average is the prediction.
        locs = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]
        feats = loo_ok_features(locs, [10.0, 99.0, 20.0], model(rng=5.0))
        assert feats[1, 0] == pytest.approx(15.0, abs=1e-8)

    def test_self_exclusion_is_exact(self, rng):
        locs = rng.uniform(0, 10, size=(8, 2))
        vals = rng.standard_normal(8)
        m = model("exponential", 0.05, 0.95, 4.0)
        base = loo_ok_features(locs, vals, m)
        bumped = vals.copy()
        bumped[3] += 10.0 * vals.std()
        pert = loo_ok_features(locs, bumped, m)
        # Row 3 must be bit-identical; the model is held fixed.
        assert base[3, 0] == pert[3, 0]
        assert base[3, 1] == pert[3, 1]

    def test_matches_subset_refit(self, rng):
        # Oracle: call ok_predict on the explicit n-1 subsets.
        n = 6
        locs = rng.uniform(0, 10, size=(n, 2))
        vals = rng.standard_normal(n)
        m = model("spherical", 0.1, 0.9, 6.0)
        feats = loo_ok_features(locs, vals, m)
        for i in range(n):
            keep = [j for j in range(n) if j != i]
            ref = ok_predict(locs[keep], vals[keep], m, [locs[i]])[0]
            assert feats[i, 0] == pytest.approx(ref.mean, abs=1e-10)
            assert feats[i, 1] == pytest.approx(ref.variance, abs=1e-10)

    def test_too_few_points(self):
        with pytest.raises(TooFewSamples):
            loo_ok_features([[0.0, 0.0], [1.0, 0.0]], [1.0, 2.0], model())

    def test_zero_sill_model_uses_held_out_means(self):
        locs = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]
        m = VariogramModel("spherical", 0.0, 0.0, 1.0)
        feats = loo_ok_features(locs, [3.0, 6.0, 9.0], m)
        assert feats[0, 0] == pytest.approx(7.5)
        assert feats[1, 0] == pytest.approx(6.0)
