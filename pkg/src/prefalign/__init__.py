"""Toolkit for evaluating and learning linear reward functions from pairwise
human preferences: an exact alignment coefficient with tie handling, a smooth
differentiable variant usable as a training loss, a seeded trainer with grid
search and early stopping, synthetic data and ablation harnesses, a gridworld
for end-to-end checks, and an interactive tuning service."""

from .alignment import (
    AlignmentReport,
    DegenerateDatasetError,
    InducedPreference,
    PairClass,
    accuracy,
    induce_preferences,
    soft_tac,
    tac,
)
from .core import (
    LinearRewardModel,
    Preference,
    PreferenceDataset,
    PreferenceRecord,
    Trajectory,
    discounted_return,
    return_gradient,
    step_reward,
)
from .losses import LossBatch, cross_entropy_loss, soft_tac_loss
from .trainer import LossKind, OptimizerKind, TrainConfig, TrainRun, grid_search, init_weights, train

__version__ = "0.1.0"

__all__ = [
    "AlignmentReport",
    "DegenerateDatasetError",
    "InducedPreference",
    "LinearRewardModel",
    "LossBatch",
    "LossKind",
    "OptimizerKind",
    "PairClass",
    "Preference",
    "PreferenceDataset",
    "PreferenceRecord",
    "TrainConfig",
    "TrainRun",
    "Trajectory",
    "accuracy",
    "cross_entropy_loss",
    "discounted_return",
    "grid_search",
    "induce_preferences",
    "init_weights",
    "return_gradient",
    "soft_tac",
    "soft_tac_loss",
    "step_reward",
    "tac",
    "train",
]
