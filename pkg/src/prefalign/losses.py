"""Loss functions and analytic gradients for learning reward weights from pairs.

Both losses are functions of the per-record return difference z = F @ weights,
where F is the pair-diff matrix from core. The smooth alignment loss is
1 - mean(y * tanh(alpha z)); cross-entropy uses the logistic preference
probability sigma(alpha z) with targets (y + 1) / 2 in {0, 0.5, 1}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    LinearRewardModel,
    PreferenceDataset,
    PreferenceRecord,
    label_array,
    pair_diff_matrix,
)


@dataclass(frozen=True)
class LossBatch:
    records: Sequence[PreferenceRecord]
    value: float
    gradient: np.ndarray


def soft_tac_sample_loss(delta: np.ndarray | float, y: np.ndarray | float, alpha: float) -> np.ndarray | float:
    """Per-sample loss 1 - y * tanh(alpha * delta); lies in [0, 2]."""
    return 1.0 - np.asarray(y, dtype=float) * np.tanh(alpha * np.asarray(delta, dtype=float))


def soft_tac_value_and_grad(
    diffs: np.ndarray, labels: np.ndarray, weights: np.ndarray, alpha: float
) -> tuple[float, np.ndarray]:
    """Array kernel: loss value and d(loss)/d(weights) for a batch.

    gradient = -mean_k[ y_k * alpha * sech^2(alpha z_k) * F_k ].
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    z = diffs @ weights
    t = np.tanh(alpha * z)
    # written as 1 - mean so the value is bit-identical to 1 - soft_tac(...)
    value = 1.0 - float(np.mean(labels * t))
    coef = -labels * alpha * (1.0 - t * t)
    grad = (diffs.T @ coef) / len(labels)
    return value, grad


def cross_entropy_value_and_grad(
    diffs: np.ndarray, labels: np.ndarray, weights: np.ndarray, alpha: float = 1.0
) -> tuple[float, np.ndarray]:
    """Array kernel for the logistic pairwise loss, overflow-safe for large |z|.

    -log sigma(z) is computed as logaddexp(0, -z), so values stay finite for
    |z| up to 1e4 and beyond.
    """
    z = alpha * (diffs @ weights)
    y_ce = (labels + 1.0) / 2.0
    value = float(np.mean(y_ce * np.logaddexp(0.0, -z) + (1.0 - y_ce) * np.logaddexp(0.0, z)))
    # sigma(z) without overflow in exp
    p = np.empty_like(z)
    pos = z >= 0
    p[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    p[~pos] = ez / (1.0 + ez)
    grad = (diffs.T @ ((p - y_ce) * alpha)) / len(labels)
    return value, grad


def _batch_arrays(
    model: LinearRewardModel,
    data: PreferenceDataset,
    records: Sequence[PreferenceRecord] | None,
) -> tuple[Sequence[PreferenceRecord], np.ndarray, np.ndarray]:
    if model.dim != data.dim:
        raise ValueError(f"model dim {model.dim} != dataset dim {data.dim}")
    if records is None:
        return data.records, pair_diff_matrix(data, model.gamma), label_array(data)
    sub = PreferenceDataset(trajectories=data.trajectories, records=list(records))
    return records, pair_diff_matrix(sub, model.gamma), label_array(sub)


def soft_tac_loss(
    model: LinearRewardModel,
    data: PreferenceDataset,
    alpha: float = 1.0,
    records: Sequence[PreferenceRecord] | None = None,
) -> LossBatch:
    """Smooth alignment loss over a batch (defaults to the whole dataset)."""
    recs, diffs, labels = _batch_arrays(model, data, records)
    value, grad = soft_tac_value_and_grad(diffs, labels, model.weights, alpha)
    return LossBatch(records=recs, value=value, gradient=grad)


def cross_entropy_loss(
    model: LinearRewardModel,
    data: PreferenceDataset,
    alpha: float = 1.0,
    records: Sequence[PreferenceRecord] | None = None,
) -> LossBatch:
    """Logistic pairwise loss over a batch (defaults to the whole dataset)."""
    recs, diffs, labels = _batch_arrays(model, data, records)
    value, grad = cross_entropy_value_and_grad(diffs, labels, model.weights, alpha)
    return LossBatch(records=recs, value=value, gradient=grad)
