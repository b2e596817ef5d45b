"""Alignment between human preferences and the preferences a reward model induces.

The alignment coefficient is Kendall's Tau-b over the observed pairs:
(P - Q) / sqrt((P + Q + X0) * (P + Q + Y0)), where P/Q count concordant and
discordant strict pairs and X0/Y0 count pairs tied on one side only. The soft
score replaces the induced sign with tanh(alpha * return difference), making
it differentiable in the weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    LinearRewardModel,
    Preference,
    PreferenceDataset,
    PreferenceRecord,
    label_array,
    pair_diff_matrix,
)


class DegenerateDatasetError(ValueError):
    """The Tau-b denominator vanishes (no strict pairs on one side)."""


class PairClass(Enum):
    CONCORDANT = "concordant"
    DISCORDANT = "discordant"
    TIED_INDUCED_ONLY = "tied_induced_only"
    TIED_HUMAN_ONLY = "tied_human_only"
    TIED_BOTH = "tied_both"


@dataclass(frozen=True)
class InducedPreference:
    """Verdict the model's returns imply for one record's pair."""

    pair: tuple[str, str]
    delta_return: float
    verdict: Preference


@dataclass(frozen=True)
class AlignmentReport:
    tac: float
    concordant: int
    discordant: int
    tied_only_induced: int
    tied_only_human: int
    tied_both: int
    per_pair: list[tuple[PreferenceRecord, InducedPreference, PairClass]]


def _verdicts(deltas: np.ndarray, tie_epsilon: float) -> np.ndarray:
    """Signs with a +/- tie_epsilon tie band, as values in {-1, 0, +1}."""
    if tie_epsilon < 0:
        raise ValueError("tie_epsilon must be >= 0")
    out = np.zeros(len(deltas))
    out[deltas > tie_epsilon] = 1.0
    out[deltas < -tie_epsilon] = -1.0
    return out


def induce_preferences(
    model: LinearRewardModel, data: PreferenceDataset, tie_epsilon: float = 0.0
) -> list[InducedPreference]:
    """One induced verdict per record, by the sign of the return difference."""
    deltas = pair_diff_matrix(data, model.gamma) @ model.weights
    signs = _verdicts(deltas, tie_epsilon)
    return [
        InducedPreference((rec.left, rec.right), float(d), Preference(int(s)))
        for rec, d, s in zip(data.records, deltas, signs)
    ]


def _classify(human_y: int, induced_y: int) -> PairClass:
    if human_y != 0 and induced_y != 0:
        return PairClass.CONCORDANT if human_y == induced_y else PairClass.DISCORDANT
    if human_y != 0:
        return PairClass.TIED_INDUCED_ONLY
    if induced_y != 0:
        return PairClass.TIED_HUMAN_ONLY
    return PairClass.TIED_BOTH


def tac(
    data: PreferenceDataset, model: LinearRewardModel, tie_epsilon: float = 0.0
) -> AlignmentReport:
    """Alignment coefficient with the concordant/discordant/tie decomposition.

    Raises DegenerateDatasetError when either Tau-b denominator factor is zero
    (all human labels tie, or the model induces only ties).
    """
    induced = induce_preferences(model, data, tie_epsilon)
    per_pair = []
    counts = {cls: 0 for cls in PairClass}
    for rec, ind in zip(data.records, induced):
        cls = _classify(rec.y, int(ind.verdict))
        counts[cls] += 1
        per_pair.append((rec, ind, cls))
    p = counts[PairClass.CONCORDANT]
    q = counts[PairClass.DISCORDANT]
    x0 = counts[PairClass.TIED_INDUCED_ONLY]
    y0 = counts[PairClass.TIED_HUMAN_ONLY]
    if p + q + x0 == 0 or p + q + y0 == 0:
        raise DegenerateDatasetError(
            f"degenerate pair counts: P={p} Q={q} X0={x0} Y0={y0}"
        )
    score = (p - q) / math.sqrt((p + q + x0) * (p + q + y0))
    return AlignmentReport(
        tac=score,
        concordant=p,
        discordant=q,
        tied_only_induced=x0,
        tied_only_human=y0,
        tied_both=counts[PairClass.TIED_BOTH],
        per_pair=per_pair,
    )


def soft_tac(data: PreferenceDataset, model: LinearRewardModel, alpha: float) -> float:
    """Mean of y * tanh(alpha * return difference) over all records."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    deltas = pair_diff_matrix(data, model.gamma) @ model.weights
    return float(np.mean(label_array(data) * np.tanh(alpha * deltas)))


def accuracy(
    data: PreferenceDataset, model: LinearRewardModel, tie_epsilon: float = 0.0
) -> float:
    """Fraction of records whose induced verdict equals the human label exactly."""
    if not data.records:
        raise ValueError("accuracy of an empty dataset is undefined")
    deltas = pair_diff_matrix(data, model.gamma) @ model.weights
    signs = _verdicts(deltas, tie_epsilon)
    return float(np.mean(signs == label_array(data)))
