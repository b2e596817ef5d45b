import numpy as np
import pytest

from prefalign.alignment import accuracy, tac
from prefalign.core import LinearRewardModel, Preference
from prefalign.datalab import (
    NoiseSpec,
    SyntheticSpec,
    ablation_preference_count,
    ablation_segment_length,
    corrupt_labels,
    generate_synthetic,
    pair_dataset_from_trajectories,
    toy_fixture,
    truncate_trajectories,
)
from prefalign.losses import soft_tac_loss


def spec_with(**kw):
    base = dict(
        dim=2,
        num_trajectories=20,
        num_preferences=40,
        true_weights=np.array([1.0, -0.5]),
        seed=0,
    )
    base.update(kw)
    return SyntheticSpec(**base)


class TestGenerateSynthetic:
    def test_zero_weights_label_everything_tie(self):
        data = generate_synthetic(spec_with(true_weights=np.zeros(2)))
        assert all(r.label is Preference.TIE for r in data.records)

    def test_one_dimensional_single_step_sign(self):
        spec = spec_with(
            dim=1,
            true_weights=np.array([1.0]),
            steps_range=(1, 1),
            num_trajectories=10,
            num_preferences=20,
        )
        data = generate_synthetic(spec)
        for rec in data.records:
            diff = float(
                data.trajectories[rec.left].steps[0, 0]
                - data.trajectories[rec.right].steps[0, 0]
            )
            assert rec.y == np.sign(diff)

    def test_true_weights_attain_perfect_alignment(self):
        spec = spec_with()
        data = generate_synthetic(spec)
        model = LinearRewardModel(weights=spec.true_weights, gamma=spec.gamma)
        assert tac(data, model).tac == 1.0

    def test_true_weights_attain_near_zero_loss_at_high_alpha(self):
        spec = spec_with(seed=3)
        data = generate_synthetic(spec)
        model = LinearRewardModel(weights=spec.true_weights, gamma=spec.gamma)
        assert soft_tac_loss(model, data, alpha=1000.0).value < 1e-3

    def test_margin_respected_with_resampling(self):
        spec = spec_with(tie_epsilon=0.5, resample_ties=True)
        data = generate_synthetic(spec)
        model = LinearRewardModel(weights=spec.true_weights, gamma=spec.gamma)
        from prefalign.alignment import induce_preferences

        deltas = [abs(i.delta_return) for i in induce_preferences(model, data)]
        assert min(deltas) > 0.5
        assert all(r.label is not Preference.TIE for r in data.records)

    def test_infeasible_request_rejected(self):
        with pytest.raises(ValueError, match="pairs exist"):
            spec_with(num_trajectories=5, num_preferences=11)

    def test_deterministic(self):
        a, b = generate_synthetic(spec_with(seed=9)), generate_synthetic(spec_with(seed=9))
        assert [r for r in a.records] == [r for r in b.records]
        for tid in a.trajectories:
            np.testing.assert_array_equal(a.trajectories[tid].steps, b.trajectories[tid].steps)

    def test_uniform_features_within_range(self):
        spec = spec_with(feature_distribution="uniform", feature_range=(0.0, 2.0))
        data = generate_synthetic(spec)
        for t in data.trajectories.values():
            assert np.all(t.steps >= 0.0) and np.all(t.steps <= 2.0)


class TestCorruptLabels:
    def test_rate_zero_identity(self):
        data = generate_synthetic(spec_with())
        noisy, mask = corrupt_labels(data, NoiseSpec(rate=0.0, seed=1))
        assert noisy.records == data.records
        assert not mask.any()

    def test_flip_fraction_concentrates(self):
        spec = spec_with(num_trajectories=200, num_preferences=10000, seed=2)
        data = generate_synthetic(spec)
        _, mask = corrupt_labels(data, NoiseSpec(rate=0.5, seed=3))
        assert abs(mask.mean() - 0.5) < 0.02

    def test_flipped_labels_move_to_other_classes(self):
        data = generate_synthetic(spec_with(seed=4))
        noisy, mask = corrupt_labels(data, NoiseSpec(rate=0.6, seed=5))
        for rec, new, flipped in zip(data.records, noisy.records, mask):
            if flipped:
                assert new.label != rec.label
            else:
                assert new.label == rec.label

    def test_trajectories_shared_untouched(self):
        data = generate_synthetic(spec_with())
        noisy, _ = corrupt_labels(data, NoiseSpec(rate=0.3, seed=1))
        assert noisy.trajectories is data.trajectories

    def test_input_dependent_rates_match_buckets(self):
        spec = spec_with(num_trajectories=220, num_preferences=12000, seed=6, dim=1,
                         true_weights=np.array([1.0]))
        data = generate_synthetic(spec)

        def rate_fn(left, right):
            mean0 = (left.steps[:, 0].mean() + right.steps[:, 0].mean()) / 2.0
            return 0.3 / (1.0 + np.exp(-mean0))

        noisy, mask = corrupt_labels(data, NoiseSpec(rate=rate_fn, seed=7))
        rates = np.array([
            rate_fn(data.trajectories[r.left], data.trajectories[r.right])
            for r in data.records
        ])
        for lo, hi in [(0.0, 0.1), (0.1, 0.2), (0.2, 0.3)]:
            bucket = (rates >= lo) & (rates < hi)
            if bucket.sum() < 100:
                continue
            assert abs(mask[bucket].mean() - rates[bucket].mean()) < 0.05

    def test_rate_bound_enforced(self):
        data = generate_synthetic(spec_with())
        with pytest.raises(ValueError, match="2/3"):
            corrupt_labels(data, NoiseSpec(rate=2.0 / 3.0, seed=0))


class TestToyFixture:
    def test_noisy_has_five_records(self):
        assert len(toy_fixture(noisy=True).records) == 5

    def test_clean_perfect_alignment_at_unit_weight(self):
        assert tac(toy_fixture(noisy=False), LinearRewardModel(weights=[1.0])).tac == 1.0

    def test_noisy_alignment_hand_count(self):
        rep = tac(toy_fixture(noisy=True), LinearRewardModel(weights=[1.0]))
        assert rep.tac == pytest.approx(0.6)

    def test_feature_values(self):
        data = toy_fixture(noisy=True)
        for k in range(5):
            assert data.trajectories[f"item-{k}"].steps[0, 0] == float(k)

    def test_mislabeled_pair_orientation(self):
        rec = toy_fixture(noisy=True).records[4]
        assert (rec.left, rec.right, rec.label) == ("item-2", "item-4", Preference.LEFT)


class TestAblationPreferenceCount:
    def test_full_size_has_zero_stderr(self):
        data = generate_synthetic(spec_with())
        model = LinearRewardModel(weights=[0.3, 1.0])
        rows = ablation_preference_count(data, [len(data.records)], repeats=5, models=[model])
        assert rows[0].stderr == 0.0

    def test_stderr_shrinks_with_size(self):
        spec = spec_with(num_trajectories=40, num_preferences=118, seed=8)
        data = generate_synthetic(spec)
        rng = np.random.default_rng(1)
        models = [LinearRewardModel(weights=rng.standard_normal(2)) for _ in range(5)]
        rows = ablation_preference_count(data, [25, 100], repeats=30, models=models, seed=2)
        assert rows[1].stderr < rows[0].stderr
        assert abs(rows[0].mean - rows[1].mean) <= 0.05

    def test_size_exceeding_dataset_rejected(self):
        data = generate_synthetic(spec_with())
        with pytest.raises(ValueError, match="exceeds"):
            ablation_preference_count(data, [len(data.records) + 1], 5,
                                      [LinearRewardModel(weights=[1.0, 0.0])])


class TestAblationSegmentLength:
    def test_long_enough_prefix_equals_full(self):
        data = generate_synthetic(spec_with(steps_range=(3, 8)))
        model = LinearRewardModel(weights=[1.0, -0.5])
        full = tac(data, model).tac
        rows = ablation_segment_length(data, [8, 50], model)
        assert rows[0].mean == full
        assert rows[1].mean == full

    def test_short_prefix_misses_late_information(self):
        # informative feature only fires on the final step
        rng = np.random.default_rng(0)
        from prefalign.core import PreferenceDataset, Trajectory

        trajs = {}
        for k in range(12):
            steps = np.zeros((6, 1))
            steps[-1, 0] = rng.standard_normal()
            trajs[f"t{k}"] = Trajectory(id=f"t{k}", steps=steps)
        model = LinearRewardModel(weights=[1.0])
        data = pair_dataset_from_trajectories(
            list(trajs.values()), model, num_preferences=30, seed=1
        )
        full = tac(data, model).tac
        assert full == 1.0
        with pytest.raises(Exception):
            # every truncated return is 0 -> all induced ties -> degenerate
            tac(truncate_trajectories(data, 1), model)

    def test_monotone_features_give_monotone_alignment(self):
        # per-step features are all ones scaled by a per-trajectory rate, so
        # longer prefixes only separate returns further
        from prefalign.core import Trajectory

        rng = np.random.default_rng(3)
        trajs = []
        for k in range(10):
            rate = rng.uniform(0.5, 2.0)
            trajs.append(Trajectory(id=f"t{k}", steps=np.full((10, 1), rate)))
        model = LinearRewardModel(weights=[1.0])
        data = pair_dataset_from_trajectories(trajs, model, num_preferences=30, seed=4)
        scores = [r.mean for r in ablation_segment_length(data, [1, 3, 6, 10], model)]
        assert all(b >= a for a, b in zip(scores, scores[1:]))


class TestPairDatasetFromTrajectories:
    def test_labels_follow_returns(self):
        data = generate_synthetic(spec_with(seed=10))
        model = LinearRewardModel(weights=[1.0, -0.5])
        paired = pair_dataset_from_trajectories(
            list(data.trajectories.values()), model, num_preferences=30, seed=2
        )
        assert tac(paired, model).tac == 1.0
        assert accuracy(paired, model) == 1.0

    def test_too_many_pairs_rejected(self):
        data = generate_synthetic(spec_with())
        with pytest.raises(ValueError, match="pairs exist"):
            pair_dataset_from_trajectories(
                list(data.trajectories.values()),
                LinearRewardModel(weights=[1.0, 0.0]),
                num_preferences=10**6,
            )
