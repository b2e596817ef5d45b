"""Seeded mini-batch reward learning with early stopping.

Protocol: draw initial weights from N(0,1), clamp to the clip bounds, then per
epoch shuffle the records, take one optimizer step per mini-batch (last batch
may be short), clamp after every step, and score (alignment, accuracy, loss)
on the evaluation set. A run "improves" when alignment is at least the best so
far AND (accuracy strictly improved OR loss dropped by more than loss_delta);
training stops after `patience` consecutive non-improving epochs and returns
the best snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .alignment import DegenerateDatasetError
from .core import LinearRewardModel, PreferenceDataset, label_array, pair_diff_matrix
from .losses import cross_entropy_value_and_grad, soft_tac_value_and_grad


class LossKind(Enum):
    SOFT_TAC = "soft-tac"
    CROSS_ENTROPY = "cross-entropy"


class OptimizerKind(Enum):
    ADAM = "adam"
    SGD = "sgd"


class StopReason(Enum):
    EARLY_STOP = "early-stop"
    MAX_EPOCHS = "max-epochs"


@dataclass(frozen=True)
class TrainConfig:
    loss_kind: LossKind = LossKind.SOFT_TAC
    alpha: float = 1.0
    learning_rate: float = 0.05
    batch_size: int = 16
    max_epochs: int = 500
    patience: int = 50
    loss_delta: float = 1e-4
    clip_low: float | None = None
    clip_high: float | None = None
    seed: int = 0
    gamma: float = 1.0
    optimizer: OptimizerKind = OptimizerKind.ADAM
    val_fraction: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.clip_low is not None and self.clip_high is not None:
            if self.clip_low > self.clip_high:
                raise ValueError("clip_low must not exceed clip_high")
        if not (0.0 <= self.val_fraction < 1.0):
            raise ValueError("val_fraction must lie in [0, 1)")


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, dim: int) -> "AdamState":
        return cls(first_moment=np.zeros(dim), second_moment=np.zeros(dim))

    def step(self, weights: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        self.step_count += 1
        self.first_moment = self.beta1 * self.first_moment + (1 - self.beta1) * grad
        self.second_moment = self.beta2 * self.second_moment + (1 - self.beta2) * grad * grad
        m_hat = self.first_moment / (1 - self.beta1**self.step_count)
        v_hat = self.second_moment / (1 - self.beta2**self.step_count)
        return weights - lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


@dataclass(frozen=True)
class EpochStats:
    tac: float
    accuracy: float
    loss: float
    weights: np.ndarray


@dataclass
class TrainRun:
    config: TrainConfig
    epoch_trace: list[EpochStats]
    best: EpochStats
    final_weights: np.ndarray
    stopped_at_epoch: int
    stop_reason: StopReason


def init_weights(
    dim: int,
    seed: int | np.random.Generator,
    clip_bounds: tuple[float | None, float | None] | None = None,
) -> np.ndarray:
    """Standard-normal draws from the seeded generator, clamped to the bounds."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    w = rng.standard_normal(dim)
    if clip_bounds is not None:
        w = _clamp(w, *clip_bounds)
    return w


def _clamp(w: np.ndarray, lo: float | None, hi: float | None) -> np.ndarray:
    if lo is None and hi is None:
        return w
    return np.clip(w, lo if lo is not None else -np.inf, hi if hi is not None else np.inf)


def tac_from_arrays(deltas: np.ndarray, labels: np.ndarray) -> float:
    """Tau-b score from raw return differences and labels (tie band 0)."""
    ind = np.sign(deltas)
    hum = np.sign(labels)
    strict = (ind != 0) & (hum != 0)
    p = int(np.sum(strict & (ind == hum)))
    q = int(np.sum(strict & (ind != hum)))
    x0 = int(np.sum((ind == 0) & (hum != 0)))
    y0 = int(np.sum((ind != 0) & (hum == 0)))
    if p + q + x0 == 0 or p + q + y0 == 0:
        raise DegenerateDatasetError(f"degenerate pair counts: P={p} Q={q} X0={x0} Y0={y0}")
    return (p - q) / math.sqrt((p + q + x0) * (p + q + y0))


def _loss_fn(kind: LossKind, alpha: float):
    if kind is LossKind.SOFT_TAC:
        return lambda F, y, w: soft_tac_value_and_grad(F, y, w, alpha)
    return lambda F, y, w: cross_entropy_value_and_grad(F, y, w, alpha)


def train(data: PreferenceDataset, config: TrainConfig) -> TrainRun:
    """Run the full protocol and return the best snapshot as final weights."""
    if not data.records:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    bounds = (config.clip_low, config.clip_high)
    weights = init_weights(data.dim, rng, bounds)

    diffs = pair_diff_matrix(data, config.gamma)
    labels = label_array(data)
    n = len(labels)
    if config.val_fraction > 0.0:
        n_val = max(1, int(round(config.val_fraction * n)))
        perm = rng.permutation(n)
        val_idx, fit_idx = perm[:n_val], perm[n_val:]
        if len(fit_idx) == 0:
            raise ValueError("validation split leaves no training records")
    else:
        val_idx = fit_idx = np.arange(n)
    fit_diffs, fit_labels = diffs[fit_idx], labels[fit_idx]
    eval_diffs, eval_labels = diffs[val_idx], labels[val_idx]

    loss_fn = _loss_fn(config.loss_kind, config.alpha)

    def stats(w: np.ndarray) -> EpochStats:
        deltas = eval_diffs @ w
        value, _ = loss_fn(eval_diffs, eval_labels, w)
        if not np.isfinite(value):
            raise FloatingPointError(f"non-finite loss {value} at weights {w}")
        return EpochStats(
            tac=tac_from_arrays(deltas, eval_labels),
            accuracy=float(np.mean(np.sign(deltas) == eval_labels)),
            loss=value,
            weights=w.copy(),
        )

    best = stats(weights)  # pre-update snapshot so a never-improving run is still valid
    adam = AdamState.zeros(data.dim)
    trace: list[EpochStats] = []
    bad_epochs = 0
    stop_reason = StopReason.MAX_EPOCHS
    for _ in range(config.max_epochs):
        order = rng.permutation(len(fit_labels))
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            _, grad = loss_fn(fit_diffs[idx], fit_labels[idx], weights)
            if config.optimizer is OptimizerKind.ADAM:
                weights = adam.step(weights, grad, config.learning_rate)
            else:
                weights = weights - config.learning_rate * grad
            weights = _clamp(weights, *bounds)
        cur = stats(weights)
        trace.append(cur)
        improved = cur.tac >= best.tac and (
            cur.accuracy > best.accuracy or cur.loss < best.loss - config.loss_delta
        )
        if improved:
            best = cur
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                stop_reason = StopReason.EARLY_STOP
                break

    return TrainRun(
        config=config,
        epoch_trace=trace,
        best=best,
        final_weights=best.weights.copy(),
        stopped_at_epoch=len(trace),
        stop_reason=stop_reason,
    )


@dataclass
class GridCell:
    learning_rate: float
    batch_size: int
    run: TrainRun | None = None
    error: str | None = None


@dataclass
class GridSearchResult:
    best: TrainRun
    cells: list[GridCell] = field(default_factory=list)
    best_cell: tuple[float, int] = (0.0, 0)


def grid_search(
    data: PreferenceDataset,
    learning_rates: list[float],
    batch_sizes: list[int],
    base_config: TrainConfig,
) -> GridSearchResult:
    """Train every (lr, batch) cell with the same seed and pick the best run.

    Ranking: highest alignment, then higher accuracy, then lower loss, then
    smaller learning rate, then smaller batch. Failed cells are recorded, not
    fatal; if every cell fails the last error is re-raised.
    """
    if not learning_rates or not batch_sizes:
        raise ValueError("grid must contain at least one learning rate and batch size")
    cells: list[GridCell] = []
    ranked: list[tuple[tuple, GridCell]] = []
    for lr in learning_rates:
        for bs in batch_sizes:
            cell = GridCell(learning_rate=lr, batch_size=bs)
            try:
                cfg = replace(base_config, learning_rate=lr, batch_size=bs)
                cell.run = train(data, cfg)
                key = (-cell.run.best.tac, -cell.run.best.accuracy, cell.run.best.loss, lr, bs)
                ranked.append((key, cell))
            except (DegenerateDatasetError, FloatingPointError, ValueError) as exc:
                cell.error = f"{type(exc).__name__}: {exc}"
            cells.append(cell)
    if not ranked:
        raise DegenerateDatasetError(f"every grid cell failed; last: {cells[-1].error}")
    ranked.sort(key=lambda item: item[0])
    winner = ranked[0][1]
    assert winner.run is not None
    return GridSearchResult(
        best=winner.run,
        cells=cells,
        best_cell=(winner.learning_rate, winner.batch_size),
    )
