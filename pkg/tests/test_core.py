import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefalign.core import (
    DatasetError,
    LinearRewardModel,
    Preference,
    PreferenceDataset,
    PreferenceRecord,
    Trajectory,
    TransitivityWarning,
    discounted_return,
    pair_diff_matrix,
    return_gradient,
    step_reward,
)
from helpers import central_diff_gradient, make_dataset


def traj(*rows):
    return Trajectory(id="t", steps=np.array(rows, dtype=float))


class TestStepReward:
    def test_zero_weights(self):
        m = LinearRewardModel(weights=np.zeros(3))
        assert step_reward(m, [1.5, -2.0, 7.0]) == 0.0

    def test_basis_projection(self):
        m = LinearRewardModel(weights=[1.0, 0.0])
        assert step_reward(m, [3.5, 9.0]) == 3.5

    def test_scalar_item(self):
        # single weight 2 on the feature value 2
        m = LinearRewardModel(weights=[2.0])
        assert step_reward(m, [2.0]) == 4.0

    def test_dimension_mismatch(self):
        m = LinearRewardModel(weights=[1.0, 2.0])
        with pytest.raises(ValueError, match="dim"):
            step_reward(m, [1.0])


class TestDiscountedReturn:
    def test_undiscounted_sum(self):
        m = LinearRewardModel(weights=[1.0], gamma=1.0)
        assert discounted_return(m, traj([1], [1], [1])) == 3.0

    def test_two_term_geometric(self):
        m = LinearRewardModel(weights=[1.0], gamma=0.5)
        assert discounted_return(m, traj([2], [2])) == 3.0

    def test_geometric_series(self):
        m = LinearRewardModel(weights=[1.0], gamma=0.99)
        expected = sum(0.99**t for t in range(10))  # independent evaluation
        got = discounted_return(m, traj(*([[1]] * 10)))
        assert got == pytest.approx(expected, rel=1e-12)

    def test_gamma_zero_is_first_step_reward(self):
        m = LinearRewardModel(weights=[2.0, -1.0], gamma=0.0)
        t = traj([3, 4], [100, 100])
        assert discounted_return(m, t) == step_reward(m, t.steps[0])

    @given(
        a=st.floats(-5, 5, allow_nan=False),
        b=st.floats(-5, 5, allow_nan=False),
        gamma=st.floats(0, 1, allow_nan=False),
    )
    @settings(max_examples=50, deadline=None)
    def test_linearity_in_weights(self, a, b, gamma):
        rng = np.random.default_rng(7)
        t = Trajectory(id="t", steps=rng.standard_normal((6, 3)))
        w1, w2 = rng.standard_normal(3), rng.standard_normal(3)
        combo = LinearRewardModel(weights=a * w1 + b * w2, gamma=gamma)
        lhs = discounted_return(combo, t)
        rhs = a * discounted_return(LinearRewardModel(weights=w1, gamma=gamma), t) + \
            b * discounted_return(LinearRewardModel(weights=w2, gamma=gamma), t)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


class TestReturnGradient:
    def test_single_step(self):
        m = LinearRewardModel(weights=[0.0, 0.0], gamma=1.0)
        np.testing.assert_array_equal(return_gradient(m, traj([1, 2])), [1.0, 2.0])

    def test_two_steps_discounted(self):
        m = LinearRewardModel(weights=[0.0, 0.0], gamma=0.5)
        np.testing.assert_array_equal(return_gradient(m, traj([1, 0], [1, 0])), [1.5, 0.0])

    def test_matches_finite_differences(self, rng):
        for _ in range(20):
            steps = rng.standard_normal((int(rng.integers(1, 8)), 4))
            gamma = float(rng.uniform(0, 1))
            t = Trajectory(id="t", steps=steps)
            w0 = rng.standard_normal(4)
            grad = return_gradient(LinearRewardModel(weights=w0, gamma=gamma), t)
            fd = central_diff_gradient(
                lambda w: discounted_return(LinearRewardModel(weights=w, gamma=gamma), t), w0
            )
            assert np.linalg.norm(grad - fd) <= 1e-6 * max(np.linalg.norm(fd), 1e-12)


class TestTrajectoryInvariants:
    def test_empty_steps_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            Trajectory(id="t", steps=np.empty((0, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            Trajectory(id="t", steps=np.array([[1.0, np.nan]]))

    def test_steps_are_immutable(self):
        t = traj([1, 2])
        with pytest.raises(ValueError):
            t.steps[0, 0] = 5.0


class TestModelInvariants:
    @pytest.mark.parametrize("gamma", [-0.1, 1.5])
    def test_gamma_range(self, gamma):
        with pytest.raises(ValueError, match="gamma"):
            LinearRewardModel(weights=[1.0], gamma=gamma)

    def test_gamma_one_allowed(self):
        assert LinearRewardModel(weights=[1.0], gamma=1.0).gamma == 1.0

    def test_non_finite_weights_rejected(self):
        with pytest.raises(ValueError):
            LinearRewardModel(weights=[np.inf])


class TestDatasetValidation:
    def test_unknown_reference(self):
        with pytest.raises(DatasetError, match="unknown"):
            make_dataset({"a": [[1.0]]}, [("a", "b", 1)])

    def test_self_comparison(self):
        with pytest.raises(ValueError, match="itself"):
            PreferenceRecord("a", "a", Preference.LEFT)

    def test_mixed_dims(self):
        with pytest.raises(DatasetError, match="dimension"):
            make_dataset({"a": [[1.0]], "b": [[1.0, 2.0]]}, [])

    def test_contradictory_duplicate(self):
        with pytest.raises(DatasetError, match="contradictory"):
            make_dataset(
                {"a": [[1.0]], "b": [[2.0]]},
                [("a", "b", 1), ("b", "a", 1)],
            )

    def test_consistent_duplicate_allowed(self):
        data = make_dataset(
            {"a": [[1.0]], "b": [[2.0]]},
            [("a", "b", 1), ("b", "a", -1), ("a", "b", 1)],
        )
        assert len(data) == 3

    def test_intransitive_cycle_warns(self):
        with pytest.warns(TransitivityWarning):
            make_dataset(
                {"a": [[1.0]], "b": [[2.0]], "c": [[3.0]]},
                [("a", "b", 1), ("b", "c", 1), ("c", "a", 1)],
            )

    def test_transitive_chain_is_silent(self, recwarn):
        make_dataset(
            {"a": [[1.0]], "b": [[2.0]], "c": [[3.0]]},
            [("a", "b", 1), ("b", "c", 1), ("a", "c", 1)],
        )
        assert not [w for w in recwarn if issubclass(w.category, TransitivityWarning)]


def test_pair_diff_matrix_matches_return_gradients(rng):
    data = make_dataset(
        {"a": rng.standard_normal((3, 2)), "b": rng.standard_normal((5, 2))},
        [("a", "b", 1), ("b", "a", -1)],
    )
    gamma = 0.9
    diffs = pair_diff_matrix(data, gamma)
    m = LinearRewardModel(weights=np.zeros(2), gamma=gamma)
    ga = return_gradient(m, data.trajectories["a"])
    gb = return_gradient(m, data.trajectories["b"])
    np.testing.assert_allclose(diffs[0], ga - gb)
    np.testing.assert_allclose(diffs[1], gb - ga)
