"""Session-based reward-tuning service.

A session holds an expert preference dataset and a feedback condition. Each
weight submission appends an immutable iteration carrying per-pair returns and
agreement flags; alignment-condition sessions additionally receive the
alignment score. Sessions persist as append-only JSONL files (one per
session), or purely in memory when no data directory is given.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

import numpy as np

from .alignment import DegenerateDatasetError, induce_preferences, tac
from .core import (
    LinearRewardModel,
    Preference,
    PreferenceDataset,
    PreferenceRecord,
    Trajectory,
    discounted_feature_sum,
)
from .trainer import TrainConfig, grid_search, train


class Condition(Enum):
    CONTROL = "control"
    ALIGNMENT = "alignment"


class UnknownSessionError(KeyError):
    pass


@dataclass(frozen=True)
class PairEvaluation:
    left: str
    right: str
    left_return: float
    right_return: float
    induced: int
    human: int
    agreement: bool


@dataclass(frozen=True)
class Iteration:
    index: int
    weights: tuple[float, ...]
    per_pair: tuple[PairEvaluation, ...]
    accuracy: float
    submitted_at: str
    tac: float | None = None  # populated only in alignment sessions
    warning: str | None = None

    def summary(self, condition: Condition) -> dict:
        out = {
            "index": self.index,
            "accuracy": self.accuracy,
            "submitted_at": self.submitted_at,
        }
        if condition is Condition.ALIGNMENT:
            out["tac"] = self.tac
            if self.warning:
                out["warning"] = self.warning
        return out


@dataclass
class TrainResult:
    index: int
    weights: tuple[float, ...]
    tac: float
    accuracy: float
    loss: float
    stopped_at_epoch: int
    stop_reason: str
    submitted_at: str
    machine_generated: bool = True
    grid_cell: tuple[float, int] | None = None


@dataclass
class Session:
    id: str
    dataset: PreferenceDataset
    condition: Condition
    gamma: float
    created_at: str
    display_indices: tuple[int, ...] | None = None  # pairs shown to the user
    scoring_indices: tuple[int, ...] | None = None  # pairs entering the metrics
    iterations: list[Iteration] = field(default_factory=list)
    train_results: list[TrainResult] = field(default_factory=list)

    def scoring_dataset(self) -> PreferenceDataset:
        if self.scoring_indices is None:
            return self.dataset
        return PreferenceDataset(
            trajectories=self.dataset.trajectories,
            records=[self.dataset.records[i] for i in self.scoring_indices],
        )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _subset(n: int, limit: int | None, seed: int) -> tuple[int, ...] | None:
    if limit is None or limit >= n:
        return None
    if limit < 1:
        raise ValueError("subset limit must be >= 1")
    rng = np.random.default_rng(seed)
    return tuple(int(k) for k in sorted(rng.choice(n, size=limit, replace=False)))


def dataset_to_payload(data: PreferenceDataset) -> dict:
    return {
        "trajectories": [
            {"id": t.id, "metadata": dict(t.metadata), "steps": t.steps.tolist()}
            for t in data.trajectories.values()
        ],
        "records": [
            {"left": r.left, "right": r.right, "label": r.y} for r in data.records
        ],
    }


def dataset_from_payload(payload: dict) -> PreferenceDataset:
    trajectories = {}
    for obj in payload["trajectories"]:
        t = Trajectory(
            id=str(obj["id"]),
            steps=np.asarray(obj["steps"], dtype=float),
            metadata={str(k): str(v) for k, v in obj.get("metadata", {}).items()},
        )
        trajectories[t.id] = t
    records = [
        PreferenceRecord(str(o["left"]), str(o["right"]), Preference(int(o["label"])))
        for o in payload["records"]
    ]
    return PreferenceDataset(trajectories=trajectories, records=records)


class SessionStore:
    """Holds sessions; appends to one JSONL file per session when persistent."""

    def __init__(self, data_dir: str | Path | None = None):
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._store_lock = threading.Lock()
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self._load_existing()

    # -- persistence -------------------------------------------------------

    def _session_file(self, session_id: str) -> Path:
        assert self.data_dir is not None
        return self.data_dir / f"{session_id}.jsonl"

    def _append(self, session_id: str, kind: str, payload: dict) -> None:
        if self.data_dir is None:
            return
        line = json.dumps({"kind": kind, **payload}, sort_keys=True)
        with self._session_file(session_id).open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()

    def _load_existing(self) -> None:
        assert self.data_dir is not None
        for path in sorted(self.data_dir.glob("*.jsonl")):
            session = None
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                obj = json.loads(line)
                kind = obj.pop("kind")
                if kind == "session":
                    session = Session(
                        id=obj["id"],
                        dataset=dataset_from_payload(obj["dataset"]),
                        condition=Condition(obj["condition"]),
                        gamma=float(obj["gamma"]),
                        created_at=obj["created_at"],
                        display_indices=(
                            tuple(obj["display_indices"])
                            if obj.get("display_indices") is not None
                            else None
                        ),
                        scoring_indices=(
                            tuple(obj["scoring_indices"])
                            if obj.get("scoring_indices") is not None
                            else None
                        ),
                    )
                elif kind == "iteration" and session is not None:
                    obj["per_pair"] = tuple(PairEvaluation(**p) for p in obj["per_pair"])
                    obj["weights"] = tuple(obj["weights"])
                    session.iterations.append(Iteration(**obj))
                elif kind == "train" and session is not None:
                    obj["weights"] = tuple(obj["weights"])
                    if obj.get("grid_cell") is not None:
                        obj["grid_cell"] = tuple(obj["grid_cell"])
                    session.train_results.append(TrainResult(**obj))
            if session is not None:
                self._sessions[session.id] = session
                self._locks[session.id] = threading.Lock()

    # -- operations ----------------------------------------------------------

    def create_session(
        self,
        dataset: PreferenceDataset,
        condition: Condition,
        gamma: float = 1.0,
        display_limit: int | None = None,
        scoring_limit: int | None = None,
        subset_seed: int = 0,
    ) -> Session:
        """display_limit caps the pairs served for display (a fixed seeded
        subset, like showing users 15 of 148 pairs); scoring_limit restricts
        the pairs entering the metrics. Both default to the full dataset."""
        if not (0.0 <= gamma <= 1.0):
            raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
        session = Session(
            id=uuid.uuid4().hex[:12],
            dataset=dataset,
            condition=condition,
            gamma=gamma,
            created_at=_now(),
            display_indices=_subset(len(dataset.records), display_limit, subset_seed),
            scoring_indices=_subset(len(dataset.records), scoring_limit, subset_seed + 1),
        )
        with self._store_lock:
            self._sessions[session.id] = session
            self._locks[session.id] = threading.Lock()
        self._append(
            session.id,
            "session",
            {
                "id": session.id,
                "condition": condition.value,
                "gamma": gamma,
                "created_at": session.created_at,
                "display_indices": session.display_indices,
                "scoring_indices": session.scoring_indices,
                "dataset": dataset_to_payload(dataset),
            },
        )
        return session

    def get(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSessionError(session_id) from None

    def evaluate(self, session_id: str, weights) -> Iteration:
        session = self.get(session_id)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != session.dataset.dim:
            raise ValueError(
                f"expected {session.dataset.dim} weights, got {w.shape[0]}"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        model = LinearRewardModel(weights=w, gamma=session.gamma)
        data = session.scoring_dataset()
        induced = induce_preferences(model, data)
        returns = _returns_by_id(data, model)
        per_pair = tuple(
            PairEvaluation(
                left=rec.left,
                right=rec.right,
                left_return=returns[rec.left],
                right_return=returns[rec.right],
                induced=int(ind.verdict),
                human=rec.y,
                agreement=ind.verdict is rec.label,
            )
            for rec, ind in zip(data.records, induced)
        )
        accuracy_value = float(np.mean([p.agreement for p in per_pair]))
        score: float | None = None
        warning: str | None = None
        if session.condition is Condition.ALIGNMENT:
            try:
                score = tac(data, model).tac
            except DegenerateDatasetError as exc:
                warning = f"alignment score undefined: {exc}"
        with self._locks[session_id]:
            iteration = Iteration(
                index=len(session.iterations),
                weights=tuple(float(x) for x in w),
                per_pair=per_pair,
                accuracy=accuracy_value,
                submitted_at=_now(),
                tac=score,
                warning=warning,
            )
            session.iterations.append(iteration)
            self._append(session_id, "iteration", asdict(iteration))
        return iteration

    def history(self, session_id: str) -> list[dict]:
        session = self.get(session_id)
        return [it.summary(session.condition) for it in session.iterations]

    def auto_train(
        self,
        session_id: str,
        config: TrainConfig,
        grid_learning_rates: list[float] | None = None,
        grid_batch_sizes: list[int] | None = None,
    ) -> TrainResult:
        session = self.get(session_id)
        config = replace(config, gamma=session.gamma)  # session owns the discount
        data = session.scoring_dataset()
        with self._locks[session_id]:
            if grid_learning_rates and grid_batch_sizes:
                result = grid_search(data, grid_learning_rates, grid_batch_sizes, config)
                run, cell = result.best, result.best_cell
            else:
                run, cell = train(data, config), None
            record = TrainResult(
                index=len(session.train_results),
                weights=tuple(float(x) for x in run.final_weights),
                tac=run.best.tac,
                accuracy=run.best.accuracy,
                loss=run.best.loss,
                stopped_at_epoch=run.stopped_at_epoch,
                stop_reason=run.stop_reason.value,
                submitted_at=_now(),
                grid_cell=cell,
            )
            session.train_results.append(record)
            self._append(session_id, "train", asdict(record))
        return record

    def pair_summaries(self, session_id: str, weights=None, all_pairs: bool = False) -> list[dict]:
        """Static pair info plus, when weights are given, per-step cumulative
        return sparklines for both sides. Serves the session's display subset
        unless all_pairs is set."""
        session = self.get(session_id)
        data = session.dataset
        model = None
        if weights is not None:
            w = np.asarray(weights, dtype=float).reshape(-1)
            if w.shape[0] != data.dim:
                raise ValueError(f"expected {data.dim} weights, got {w.shape[0]}")
            model = LinearRewardModel(weights=w, gamma=session.gamma)
        if all_pairs or session.display_indices is None:
            shown = list(enumerate(data.records))
        else:
            shown = [(i, data.records[i]) for i in session.display_indices]
        out = []
        for index, rec in shown:
            entry = {"index": index, "left": rec.left, "right": rec.right, "label": rec.y}
            for side, tid in (("left", rec.left), ("right", rec.right)):
                traj = data.trajectories[tid]
                entry[f"{side}_length"] = len(traj)
                entry[f"{side}_feature_totals"] = discounted_feature_sum(
                    traj, session.gamma
                ).tolist()
                if model is not None:
                    rewards = traj.steps @ model.weights
                    discounts = np.power(session.gamma, np.arange(len(traj)))
                    entry[f"{side}_sparkline"] = np.cumsum(discounts * rewards).tolist()
            out.append(entry)
        return out


def _returns_by_id(data: PreferenceDataset, model: LinearRewardModel) -> dict[str, float]:
    out = {}
    for rec in data.records:
        for tid in (rec.left, rec.right):
            if tid not in out:
                out[tid] = float(
                    discounted_feature_sum(data.trajectories[tid], model.gamma)
                    @ model.weights
                )
    return out
