import math

import numpy as np
import pytest

from fairpareto.scalarize import (RHO, NormalizationState, ScalarizeError,
                                  parego, sample_weights,
                                  scalarize_objectives)


class TestSampleWeights:
    def test_simplex_membership(self, rng):
        for _ in range(200):
            w = sample_weights(rng, 3)
            assert w.shape == (3,)
            assert np.all(w >= 0)
            assert math.fsum(w) == pytest.approx(1.0, abs=1e-12)

    def test_mean_is_uniform(self):
        rng = np.random.default_rng(7)
        draws = np.array([sample_weights(rng, 2) for _ in range(10_000)])
        assert 0.48 <= draws[:, 0].mean() <= 0.52

    def test_not_degenerate(self):
        rng = np.random.default_rng(3)
        draws = np.array([sample_weights(rng, 2) for _ in range(1000)])
        # interior of the simplex gets hit, not just vertices
        assert ((draws[:, 0] > 0.25) & (draws[:, 0] < 0.75)).mean() > 0.3

    def test_requires_two_objectives(self, rng):
        for k in (0, 1):
            with pytest.raises(ScalarizeError, match="at least two"):
                sample_weights(rng, k)

    def test_deterministic_under_seed(self):
        a = sample_weights(np.random.default_rng(11), 4)
        b = sample_weights(np.random.default_rng(11), 4)
        assert np.array_equal(a, b)


class TestNormalization:
    def one_state(self):
        return NormalizationState.from_objectives(
            [{"error": 0.2, "rank_disparity": 1.0},
             {"error": 0.6, "rank_disparity": 3.0}])

    def test_endpoints(self):
        state = self.one_state()
        lo = state.normalize({"error": 0.2, "rank_disparity": 1.0})
        hi = state.normalize({"error": 0.6, "rank_disparity": 3.0})
        assert list(lo) == [0.0, 0.0]
        assert list(hi) == [1.0, 1.0]

    def test_midpoint(self):
        state = self.one_state()
        mid = state.normalize({"error": 0.4, "rank_disparity": 2.0})
        assert mid == pytest.approx([0.5, 0.5])

    def test_clamped_outside_range(self):
        state = self.one_state()
        assert list(state.normalize({"error": 0.0, "rank_disparity": 9.0})) \
            == [0.0, 1.0]

    def test_degenerate_range_maps_to_zero(self):
        state = NormalizationState.from_objectives(
            [{"error": 0.5}, {"error": 0.5}])
        assert list(state.normalize({"error": 0.5})) == [0.0]
        assert list(state.normalize({"error": 0.9})) == [0.0]

    def test_sorted_name_order(self):
        state = NormalizationState.from_objectives(
            [{"b": 0.0, "a": 0.0}, {"a": 1.0, "b": 2.0}])
        assert state.names == ("a", "b")
        out = state.normalize({"b": 1.0, "a": 1.0})
        assert out == pytest.approx([1.0, 0.5])

    def test_missing_name_errors(self):
        state = self.one_state()
        with pytest.raises(ScalarizeError, match="missing from record"):
            state.normalize({"error": 0.4})

    def test_inconsistent_history_errors(self):
        with pytest.raises(ScalarizeError, match="objective names"):
            NormalizationState.from_objectives([{"a": 1.0}, {"b": 1.0}])

    def test_empty_history_errors(self):
        with pytest.raises(ScalarizeError, match="empty"):
            NormalizationState.from_objectives([])


class TestParego:
    def test_worked_example_degenerate_weight(self):
        s = parego(np.array([0.3, 0.9]), np.array([1.0, 0.0]))
        assert s == pytest.approx(0.315, abs=1e-12)

    def test_worked_example_balanced(self):
        s = parego(np.array([0.2, 0.4]), np.array([0.5, 0.5]))
        assert s == pytest.approx(0.215, abs=1e-12)

    def test_zero_vector_scores_zero(self, rng):
        w = sample_weights(rng, 3)
        assert parego(np.zeros(3), w) == 0.0

    def test_ones_vector_scores_max_weight_plus_rho(self, rng):
        for _ in range(50):
            w = sample_weights(rng, 4)
            assert parego(np.ones(4), w) == pytest.approx(np.max(w) + RHO)

    def test_rho_zero_is_weighted_chebyshev(self, rng):
        for _ in range(100):
            f = rng.random(3)
            w = sample_weights(rng, 3)
            assert parego(f, w, rho=0.0) == pytest.approx(np.max(w * f))

    def test_monotone_in_dominance(self, rng):
        # f' dominating f scores no worse under every weight vector
        for _ in range(2000):
            f = rng.random(2)
            better = f - rng.random(2) * f
            w = sample_weights(rng, 2)
            assert parego(better, w) <= parego(f, w) + 1e-15

    def test_dimension_mismatch(self):
        with pytest.raises(ScalarizeError, match="shape mismatch"):
            parego(np.array([0.1, 0.2]), np.array([1.0]))


class TestScalarizeObjectives:
    def test_pairs_by_sorted_name(self):
        state = NormalizationState.from_objectives(
            [{"b": 0.0, "a": 0.0}, {"a": 1.0, "b": 1.0}])
        w = np.array([1.0, 0.0])
        # weight 1 rides on "a"
        high_a = scalarize_objectives({"a": 1.0, "b": 0.0}, state, w)
        high_b = scalarize_objectives({"a": 0.0, "b": 1.0}, state, w)
        assert high_a > high_b

    def test_matches_manual_composition(self, rng):
        state = NormalizationState.from_objectives(
            [{"error": 0.0, "rank_disparity": 0.0},
             {"error": 1.0, "rank_disparity": 4.0}])
        for _ in range(50):
            objectives = {"error": float(rng.random()),
                          "rank_disparity": float(rng.random() * 4)}
            w = sample_weights(rng, 2)
            expected = parego(state.normalize(objectives), w, RHO)
            got = scalarize_objectives(objectives, state, w)
            assert got == pytest.approx(expected, abs=1e-15)

    def test_weight_width_check(self):
        state = NormalizationState.from_objectives(
            [{"a": 0.0}, {"a": 1.0}])
        with pytest.raises(ScalarizeError, match="weights"):
            scalarize_objectives({"a": 0.5}, state, np.array([0.5, 0.5]))
