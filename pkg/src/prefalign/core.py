"""Domain types for trajectories, pairwise preferences, and linear reward models.

A trajectory is stored as its per-step feature vectors; a linear reward model
scores a step as the dot product of its weights with the step features, and a
trajectory by the discounted sum of step rewards.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class Preference(IntEnum):
    """Pairwise preference label; the integer value is the canonical y encoding."""

    LEFT = 1
    RIGHT = -1
    TIE = 0


class DatasetError(ValueError):
    """Raised for structurally invalid preference datasets."""


class TransitivityWarning(UserWarning):
    """Strict preferences in the dataset contain a cycle."""


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Trajectory:
    """A finite sequence of per-step feature vectors, shape (T, d)."""

    id: str
    steps: np.ndarray
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=float)
        if steps.ndim != 2 or steps.shape[0] == 0:
            raise ValueError(f"trajectory {self.id!r}: steps must be a non-empty (T, d) array")
        if not np.all(np.isfinite(steps)):
            raise ValueError(f"trajectory {self.id!r}: non-finite feature values")
        object.__setattr__(self, "steps", _as_readonly(steps))

    @property
    def dim(self) -> int:
        return self.steps.shape[1]

    def __len__(self) -> int:
        return self.steps.shape[0]


@dataclass(frozen=True)
class PreferenceRecord:
    """One labeled comparison: label LEFT means the left trajectory is preferred."""

    left: str
    right: str
    label: Preference

    def __post_init__(self):
        if self.left == self.right:
            raise ValueError(f"record compares trajectory {self.left!r} with itself")
        object.__setattr__(self, "label", Preference(self.label))

    @property
    def y(self) -> int:
        return int(self.label)


@dataclass(frozen=True)
class LinearRewardModel:
    """Weight vector plus discount; immutable."""

    weights: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size == 0 or not np.all(np.isfinite(w)):
            raise ValueError("weights must be a non-empty finite vector")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        object.__setattr__(self, "weights", _as_readonly(w))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class PreferenceDataset:
    """Trajectories plus labeled pairs over them.

    Validated at construction: records must reference known trajectories, all
    trajectories share one feature dimension, and no unordered pair may carry
    contradictory labels. Intransitive strict preferences only warn.
    """

    trajectories: dict[str, Trajectory]
    records: list[PreferenceRecord]
    dim: int = -1

    def __post_init__(self):
        if not self.trajectories:
            raise DatasetError("dataset has no trajectories")
        dims = {t.dim for t in self.trajectories.values()}
        if len(dims) != 1:
            raise DatasetError(f"inconsistent feature dimensions: {sorted(dims)}")
        d = dims.pop()
        if self.dim == -1:
            object.__setattr__(self, "dim", d)
        elif self.dim != d:
            raise DatasetError(f"declared dim {self.dim} != trajectory dim {d}")
        for tid, traj in self.trajectories.items():
            if tid != traj.id:
                raise DatasetError(f"trajectory keyed {tid!r} has id {traj.id!r}")
        self._check_records()

    def _check_records(self):
        seen: dict[tuple[str, str], tuple[str, str, int]] = {}
        for rec in self.records:
            for tid in (rec.left, rec.right):
                if tid not in self.trajectories:
                    raise DatasetError(f"record references unknown trajectory {tid!r}")
            # canonical orientation: (min, max) with the label flipped if reversed
            if rec.left <= rec.right:
                key, rel = (rec.left, rec.right), rec.y
            else:
                key, rel = (rec.right, rec.left), -rec.y
            prev = seen.get(key)
            if prev is not None and prev[2] != rel:
                raise DatasetError(
                    f"contradictory labels for pair ({key[0]!r}, {key[1]!r})"
                )
            seen[key] = (rec.left, rec.right, rel)
        self._warn_if_intransitive(seen)

    @staticmethod
    def _warn_if_intransitive(seen: dict[tuple[str, str], tuple[str, str, int]]):
        # cycle in the strict-preference digraph => intransitive data
        edges: dict[str, set[str]] = {}
        for (a, b), (_, _, rel) in seen.items():
            if rel > 0:
                edges.setdefault(a, set()).add(b)
            elif rel < 0:
                edges.setdefault(b, set()).add(a)
        color: dict[str, int] = {}

        def has_cycle(node: str) -> bool:
            color[node] = 1
            for nxt in edges.get(node, ()):
                c = color.get(nxt, 0)
                if c == 1 or (c == 0 and has_cycle(nxt)):
                    return True
            color[node] = 2
            return False

        for start in list(edges):
            if color.get(start, 0) == 0 and has_cycle(start):
                warnings.warn(
                    "strict preferences contain a cycle (intransitive data)",
                    TransitivityWarning,
                    stacklevel=4,
                )
                return

    def __len__(self) -> int:
        return len(self.records)


def _check_dim(model: LinearRewardModel, d: int):
    if model.dim != d:
        raise ValueError(f"model dim {model.dim} != feature dim {d}")


def step_reward(model: LinearRewardModel, features: np.ndarray) -> float:
    """Reward of a single transition: weights . features."""
    phi = np.asarray(features, dtype=float).reshape(-1)
    _check_dim(model, phi.shape[0])
    return float(model.weights @ phi)


def _discount_weights(gamma: float, n: int) -> np.ndarray:
    return np.power(gamma, np.arange(n, dtype=float))


def discounted_return(model: LinearRewardModel, traj: Trajectory) -> float:
    """Discounted sum of step rewards along the trajectory, exponent starting at 0."""
    _check_dim(model, traj.dim)
    g = _discount_weights(model.gamma, len(traj))
    return float(g @ (traj.steps @ model.weights))


def return_gradient(model: LinearRewardModel, traj: Trajectory) -> np.ndarray:
    """Gradient of the discounted return w.r.t. the weights: the discounted feature sum."""
    _check_dim(model, traj.dim)
    g = _discount_weights(model.gamma, len(traj))
    return g @ traj.steps


def discounted_feature_sum(traj: Trajectory, gamma: float) -> np.ndarray:
    """Sum_t gamma^t * phi_t for an explicit discount."""
    return _discount_weights(gamma, len(traj)) @ traj.steps


def pair_diff_matrix(data: PreferenceDataset, gamma: float) -> np.ndarray:
    """(N, d) matrix of per-record return-gradient differences (left minus right).

    Row k dotted with a weight vector gives that record's return difference, so
    alignment scores and losses reduce to matrix products against this.
    """
    sums: dict[str, np.ndarray] = {}
    rows = np.empty((len(data.records), data.dim))
    for k, rec in enumerate(data.records):
        for tid in (rec.left, rec.right):
            if tid not in sums:
                sums[tid] = discounted_feature_sum(data.trajectories[tid], gamma)
        rows[k] = sums[rec.left] - sums[rec.right]
    return rows


def label_array(data: PreferenceDataset) -> np.ndarray:
    """(N,) vector of y labels in {-1, 0, +1}."""
    return np.array([rec.y for rec in data.records], dtype=float)
