"""Synthetic preference data, label noise, the five-item toy fixture, and
robustness ablation harnesses."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .alignment import tac
from .core import (
    LinearRewardModel,
    Preference,
    PreferenceDataset,
    PreferenceRecord,
    Trajectory,
    discounted_feature_sum,
)

MAX_NOISE_RATE = 2.0 / 3.0  # (n - 1) / n for n = 3 label classes


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a dataset whose labels come from a known weight vector.

    With tie_epsilon = 0 (and zero-difference pairs resampled away) the true
    weights satisfy every strict preference, so the dataset is realizable by
    construction. With resample_ties=True, pairs whose return difference falls
    inside the tie band are replaced rather than labeled as ties, which yields
    a tie-free dataset with margin > tie_epsilon.
    """

    dim: int
    num_trajectories: int
    num_preferences: int
    true_weights: np.ndarray
    steps_range: tuple[int, int] = (5, 15)
    feature_distribution: str = "normal"
    feature_range: tuple[float, float] = (-1.0, 1.0)
    gamma: float = 1.0
    tie_epsilon: float = 0.0
    seed: int = 0
    resample_ties: bool = False

    def __post_init__(self):
        w = np.asarray(self.true_weights, dtype=float).reshape(-1)
        if w.shape[0] != self.dim:
            raise ValueError(f"true_weights length {w.shape[0]} != dim {self.dim}")
        max_pairs = self.num_trajectories * (self.num_trajectories - 1) // 2
        if self.num_preferences > max_pairs:
            raise ValueError(
                f"{self.num_preferences} preferences requested but only "
                f"{max_pairs} distinct pairs exist"
            )
        if self.feature_distribution not in ("normal", "uniform"):
            raise ValueError(f"unknown feature distribution {self.feature_distribution!r}")
        object.__setattr__(self, "true_weights", w)


def generate_synthetic(spec: SyntheticSpec) -> PreferenceDataset:
    """Sample trajectories and distinct unordered pairs, labeled by true weights."""
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.steps_range
    trajectories: dict[str, Trajectory] = {}
    sums = np.empty((spec.num_trajectories, spec.dim))
    for k in range(spec.num_trajectories):
        n_steps = int(rng.integers(lo, hi + 1))
        if spec.feature_distribution == "normal":
            steps = rng.standard_normal((n_steps, spec.dim))
        else:
            steps = rng.uniform(*spec.feature_range, size=(n_steps, spec.dim))
        tid = f"traj-{k:04d}"
        traj = Trajectory(id=tid, steps=steps)
        trajectories[tid] = traj
        sums[k] = discounted_feature_sum(traj, spec.gamma)

    all_pairs = [
        (i, j)
        for i in range(spec.num_trajectories)
        for j in range(i + 1, spec.num_trajectories)
    ]
    order = rng.permutation(len(all_pairs))
    records: list[PreferenceRecord] = []
    for idx in order:
        if len(records) == spec.num_preferences:
            break
        i, j = all_pairs[idx]
        delta = float((sums[i] - sums[j]) @ spec.true_weights)
        if abs(delta) <= spec.tie_epsilon:
            if spec.resample_ties:
                continue  # replaced by the next candidate pair
            label = Preference.TIE
        else:
            label = Preference.LEFT if delta > 0 else Preference.RIGHT
        records.append(PreferenceRecord(f"traj-{i:04d}", f"traj-{j:04d}", label))
    if len(records) < spec.num_preferences:
        raise ValueError(
            f"could only realize {len(records)} of {spec.num_preferences} "
            "preferences after resampling tied pairs"
        )
    return PreferenceDataset(trajectories=trajectories, records=records)


def pair_dataset_from_trajectories(
    trajectories: Sequence[Trajectory],
    model: LinearRewardModel,
    num_preferences: int,
    seed: int = 0,
    tie_epsilon: float = 0.0,
    resample_ties: bool = False,
) -> PreferenceDataset:
    """Label random distinct pairs of existing trajectories by the model's returns."""
    n = len(trajectories)
    max_pairs = n * (n - 1) // 2
    if num_preferences > max_pairs:
        raise ValueError(f"{num_preferences} preferences requested, only {max_pairs} pairs exist")
    rng = np.random.default_rng(seed)
    sums = np.array([discounted_feature_sum(t, model.gamma) for t in trajectories])
    returns = sums @ model.weights
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    order = rng.permutation(len(all_pairs))
    records: list[PreferenceRecord] = []
    for idx in order:
        if len(records) == num_preferences:
            break
        i, j = all_pairs[idx]
        delta = float(returns[i] - returns[j])
        if abs(delta) <= tie_epsilon:
            if resample_ties:
                continue
            label = Preference.TIE
        else:
            label = Preference.LEFT if delta > 0 else Preference.RIGHT
        records.append(PreferenceRecord(trajectories[i].id, trajectories[j].id, label))
    if len(records) < num_preferences:
        raise ValueError(
            f"could only realize {len(records)} of {num_preferences} preferences"
        )
    return PreferenceDataset(
        trajectories={t.id: t for t in trajectories}, records=records
    )


RateFn = Callable[[Trajectory, Trajectory], float]


@dataclass(frozen=True)
class NoiseSpec:
    """Label corruption: with probability rate, replace the label by one of the
    other two classes uniformly. rate may be a constant or a function of the
    pair's trajectories; every rate must stay below 2/3."""

    rate: float | RateFn
    seed: int = 0


def corrupt_labels(
    data: PreferenceDataset, noise: NoiseSpec
) -> tuple[PreferenceDataset, np.ndarray]:
    """Return a dataset with independently flipped labels plus the flip mask."""
    rng = np.random.default_rng(noise.seed)
    records: list[PreferenceRecord] = []
    mask = np.zeros(len(data.records), dtype=bool)
    for k, rec in enumerate(data.records):
        rate = (
            noise.rate
            if isinstance(noise.rate, (int, float))
            else noise.rate(data.trajectories[rec.left], data.trajectories[rec.right])
        )
        if not 0.0 <= rate < MAX_NOISE_RATE:
            raise ValueError(f"noise rate {rate} outside [0, 2/3) for record {k}")
        if rng.random() < rate:
            others = [lab for lab in Preference if lab != rec.label]
            new_label = others[int(rng.integers(len(others)))]
            records.append(PreferenceRecord(rec.left, rec.right, new_label))
            mask[k] = True
        else:
            records.append(rec)
    return PreferenceDataset(trajectories=data.trajectories, records=records), mask


def toy_fixture(noisy: bool) -> PreferenceDataset:
    """Five single-step 1-D items with feature values 0..4.

    Four pairs of neighbours each prefer the higher-feature item; the noisy
    variant adds the deliberately mislabeled pair (2, 4) preferring item 2.
    """
    trajectories = {
        f"item-{k}": Trajectory(id=f"item-{k}", steps=np.array([[float(k)]]))
        for k in range(5)
    }
    records = [
        PreferenceRecord(f"item-{i}", f"item-{i + 1}", Preference.RIGHT)
        for i in range(4)
    ]
    if noisy:
        records.append(PreferenceRecord("item-2", "item-4", Preference.LEFT))
    return PreferenceDataset(trajectories=trajectories, records=records)


@dataclass(frozen=True)
class AblationRow:
    parameter: float
    mean: float
    stderr: float
    n: int


def subset_dataset(
    data: PreferenceDataset, indices: Sequence[int]
) -> PreferenceDataset:
    records = [data.records[i] for i in indices]
    return PreferenceDataset(trajectories=data.trajectories, records=records)


def ablation_preference_count(
    data: PreferenceDataset,
    sizes: Sequence[int],
    repeats: int,
    models: Sequence[LinearRewardModel],
    seed: int = 0,
) -> list[AblationRow]:
    """Alignment stability vs number of preferences.

    For each size, draw `repeats` random subsets (without replacement) and
    score every model on each subset; a row aggregates all (model, subset)
    scores for that size. The model set is shared across sizes.
    """
    if repeats < 2:
        raise ValueError("repeats must be >= 2")
    rng = np.random.default_rng(seed)
    rows = []
    for size in sizes:
        if size > len(data.records):
            raise ValueError(f"subset size {size} exceeds dataset size {len(data.records)}")
        scores = []
        for _ in range(repeats):
            idx = rng.choice(len(data.records), size=size, replace=False)
            sub = subset_dataset(data, idx)
            for model in models:
                scores.append(tac(sub, model).tac)
        scores = np.asarray(scores)
        stderr = float(np.std(scores, ddof=1) / np.sqrt(len(scores)))
        rows.append(AblationRow(float(size), float(np.mean(scores)), stderr, len(scores)))
    return rows


def truncate_trajectories(data: PreferenceDataset, length: int) -> PreferenceDataset:
    """Keep only the first `length` steps of every trajectory (labels unchanged)."""
    if length < 1:
        raise ValueError("length must be positive")
    trajectories = {
        tid: Trajectory(id=tid, steps=traj.steps[:length], metadata=traj.metadata)
        for tid, traj in data.trajectories.items()
    }
    return PreferenceDataset(trajectories=trajectories, records=data.records)


def ablation_segment_length(
    data: PreferenceDataset,
    lengths: Sequence[int],
    model: LinearRewardModel,
) -> list[AblationRow]:
    """Alignment of the same labels when returns use truncated trajectory prefixes."""
    rows = []
    for length in lengths:
        score = tac(truncate_trajectories(data, length), model).tac
        rows.append(AblationRow(float(length), score, 0.0, len(data.records)))
    return rows
