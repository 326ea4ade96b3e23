import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcom import mgda, nn, optim

from helpers import grid_min_norm_objective, min_norm_objective

finite_floats = st.floats(min_value=-100.0, max_value=100.0, allow_nan=False)


class TestGradientPair:
    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            mgda.GradientPair(np.ones(3), np.ones(4))

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            mgda.GradientPair(np.ones(0), np.ones(0))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            mgda.GradientPair(np.array([1.0, np.nan]), np.ones(2))


class TestMinNormLambda:
    def test_identical_vectors_tie_break_to_one(self):
        assert mgda.min_norm_lambda(mgda.GradientPair(np.ones(2), np.ones(2))) == 1.0

    def test_orthonormal_pair_balances(self):
        lam = mgda.min_norm_lambda(
            mgda.GradientPair(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        )
        assert lam == pytest.approx(0.5)

    def test_nested_vectors_clamp_to_zero(self):
        lam = mgda.min_norm_lambda(
            mgda.GradientPair(np.array([2.0, 0.0]), np.array([1.0, 0.0]))
        )
        assert lam == 0.0

    def test_always_in_unit_interval_and_beats_grid(self):
        rng = np.random.default_rng(0)
        for trial in range(300):
            dim = int(rng.integers(2, 64))
            theta = rng.standard_normal(dim)
            theta_bar = rng.standard_normal(dim)
            if trial % 3 == 0:  # near-parallel pairs
                theta_bar = theta * rng.uniform(0.5, 2.0) + 1e-7 * rng.standard_normal(dim)
            if trial % 7 == 0:  # near-antiparallel
                theta_bar = -theta * rng.uniform(0.5, 2.0) + 1e-7 * rng.standard_normal(dim)
            lam = mgda.min_norm_lambda(mgda.GradientPair(theta, theta_bar))
            assert 0.0 <= lam <= 1.0
            _, grid_best = grid_min_norm_objective(theta, theta_bar)
            assert min_norm_objective(theta, theta_bar, lam) <= grid_best + 1e-9

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 8), st.data())
    def test_unit_interval_and_grid_dominance_property(self, dim, data):
        theta = np.asarray(data.draw(st.lists(finite_floats, min_size=dim, max_size=dim)))
        theta_bar = np.asarray(data.draw(st.lists(finite_floats, min_size=dim, max_size=dim)))
        lam = mgda.min_norm_lambda(mgda.GradientPair(theta, theta_bar))
        assert 0.0 <= lam <= 1.0
        _, grid_best = grid_min_norm_objective(theta, theta_bar, points=101)
        assert min_norm_objective(theta, theta_bar, lam) <= grid_best + 1e-7

    def test_rescaling_one_gradient_moves_lambda(self):
        # no positive-scaling invariance is claimed: the closed form shifts
        # with the privacy gradient's magnitude but still beats the grid
        theta = np.array([1.0, 0.0])
        theta_bar = np.array([0.0, 1.0])
        lams = []
        for rho in (0.25, 1.0, 4.0):
            scaled = theta_bar * rho
            lam = mgda.min_norm_lambda(mgda.GradientPair(theta, scaled))
            _, grid_best = grid_min_norm_objective(theta, scaled)
            assert min_norm_objective(theta, scaled, lam) <= grid_best + 1e-9
            lams.append(lam)
        assert lams[0] < lams[1] < lams[2]

    def test_interior_solution_is_stationary(self):
        # KKT: the derivative of the squared norm vanishes at an interior lam
        rng = np.random.default_rng(1)
        found = 0
        for _ in range(50):
            theta = rng.standard_normal(6)
            theta_bar = rng.standard_normal(6)
            lam = mgda.min_norm_lambda(mgda.GradientPair(theta, theta_bar))
            if 0.0 < lam < 1.0:
                found += 1
                combined = lam * theta + (1 - lam) * theta_bar
                derivative = 2.0 * combined @ (theta - theta_bar)
                assert abs(derivative) < 1e-6
        assert found > 0


class TestFrankWolfe:
    def test_identical_gradients_stay_uniform(self):
        g = np.array([3.0, -1.0])
        weights = mgda.frank_wolfe([g, g.copy()]).values
        np.testing.assert_allclose(weights, [0.5, 0.5])

    def test_orthonormal_pair(self):
        weights = mgda.frank_wolfe(
            [np.array([1.0, 0.0]), np.array([0.0, 1.0])], tol=1e-6
        ).values
        np.testing.assert_allclose(weights, [0.5, 0.5], atol=1e-6)

    def test_agrees_with_closed_form_on_pairs(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            theta = rng.standard_normal(2)
            theta_bar = rng.standard_normal(2)
            lam = mgda.min_norm_lambda(mgda.GradientPair(theta, theta_bar))
            weights = mgda.frank_wolfe([theta, theta_bar], tol=1e-9).values
            fw_value = min_norm_objective(theta, theta_bar, weights[0])
            _, grid_best = grid_min_norm_objective(theta, theta_bar)
            assert fw_value <= grid_best + 1e-9
            assert min_norm_objective(theta, theta_bar, lam) >= fw_value - 1e-9

    def test_three_objectives_beat_pairwise_grid(self):
        rng = np.random.default_rng(3)
        gs = [rng.standard_normal(4) for _ in range(3)]
        weights = mgda.frank_wolfe(gs, max_iters=500, tol=1e-12).values
        combo = sum(w * g for w, g in zip(weights, gs))
        value = float(combo @ combo)
        # sample many random simplex points; none should beat the solver much
        samples = rng.dirichlet(np.ones(3), size=2000)
        for lamb in samples:
            c = sum(w * g for w, g in zip(lamb, gs))
            assert value <= float(c @ c) + 1e-6

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            mgda.frank_wolfe([np.ones(3), np.ones(4)])

    def test_single_gradient_rejected(self):
        with pytest.raises(ValueError, match="two"):
            mgda.frank_wolfe([np.ones(3)])

    def test_returns_valid_simplex_weights(self):
        rng = np.random.default_rng(4)
        weights = mgda.frank_wolfe([rng.standard_normal(5) for _ in range(4)]).values
        assert np.all(weights >= 0)
        assert abs(weights.sum() - 1.0) <= 1e-12


class TestSimplexWeights:
    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            mgda.SimplexWeights(np.array([1.2, -0.2]))

    def test_sum_enforced(self):
        with pytest.raises(ValueError):
            mgda.SimplexWeights(np.array([0.5, 0.4]))


class TestWeightedStep:
    def _setup(self):
        spec = nn.DenseNetworkSpec.chain([(1, 1, "identity")])  # w and b: 2 params
        params = nn.ParameterSet(spec, np.array([1.0, -1.0]))
        state = optim.fresh_state(2, lr=0.01)
        pair = mgda.GradientPair(np.array([1.0, 0.0]), np.array([0.0, -1.0]))
        return spec, params, state, pair

    def test_lambda_one_pure_utility_direction(self):
        spec, params, state, pair = self._setup()
        _, stepped = mgda.mgda_weighted_step(params, state, pair, 1.0)
        _, expected = optim.adam_step(state, params, pair.theta)
        np.testing.assert_array_equal(stepped.flat, expected.flat)

    def test_lambda_zero_pure_privacy_direction(self):
        spec, params, state, pair = self._setup()
        _, stepped = mgda.mgda_weighted_step(params, state, pair, 0.0)
        _, expected = optim.adam_step(state, params, pair.theta_bar)
        np.testing.assert_array_equal(stepped.flat, expected.flat)

    def test_convex_combination_hand_check(self):
        spec, params, state, pair = self._setup()
        lam = 0.3
        _, stepped = mgda.mgda_weighted_step(params, state, pair, lam)
        combined = lam * pair.theta + (1 - lam) * pair.theta_bar
        np.testing.assert_allclose(combined, [0.3, -0.7])
        _, expected = optim.adam_step(state, params, combined)
        np.testing.assert_array_equal(stepped.flat, expected.flat)

    def test_lambda_out_of_range_rejected(self):
        spec, params, state, pair = self._setup()
        with pytest.raises(ValueError):
            mgda.mgda_weighted_step(params, state, pair, 1.2)
