"""Line-oriented file formats for trajectories, preferences, and ablation tables.

Both data formats are JSONL with a JSON header line; key order is canonical
(sorted) so serialize -> parse -> serialize is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Preference, PreferenceDataset, PreferenceRecord, Trajectory
from .datalab import AblationRow


class ParseError(ValueError):
    """Malformed data file; the message names the file and line number."""


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def save_trajectories(
    path: str | Path,
    trajectories: Iterable[Trajectory],
    gamma_default: float = 1.0,
) -> None:
    trajs = list(trajectories)
    if not trajs:
        raise ValueError("nothing to write")
    dim = trajs[0].dim
    lines = [_dumps({"dim": dim, "gamma_default": gamma_default})]
    for t in sorted(trajs, key=lambda t: t.id):
        lines.append(
            _dumps({"id": t.id, "metadata": dict(t.metadata), "steps": t.steps.tolist()})
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_trajectories(path: str | Path) -> tuple[dict[str, Trajectory], int, float]:
    """Returns (trajectories, dim, gamma_default)."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError(f"{path}:1: empty trajectory file")
    header = _parse_json(path, 1, lines[0])
    try:
        dim, gamma_default = int(header["dim"]), float(header["gamma_default"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}:1: bad header ({exc})") from exc
    out: dict[str, Trajectory] = {}
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        obj = _parse_json(path, no, line)
        try:
            traj = Trajectory(
                id=str(obj["id"]),
                steps=np.asarray(obj["steps"], dtype=float),
                metadata={str(k): str(v) for k, v in obj.get("metadata", {}).items()},
            )
        except (KeyError, ValueError) as exc:
            raise ParseError(f"{path}:{no}: bad trajectory ({exc})") from exc
        if traj.dim != dim:
            raise ParseError(f"{path}:{no}: trajectory dim {traj.dim} != header dim {dim}")
        if traj.id in out:
            raise ParseError(f"{path}:{no}: duplicate trajectory id {traj.id!r}")
        out[traj.id] = traj
    if not out:
        raise ParseError(f"{path}:1: no trajectories in file")
    return out, dim, gamma_default


def save_preferences(
    path: str | Path,
    records: Sequence[PreferenceRecord],
    trajectories_file: str,
) -> None:
    """trajectories_file is stored as given (normally relative to `path`)."""
    lines = [_dumps({"trajectories": trajectories_file})]
    for rec in records:
        lines.append(_dumps({"label": rec.y, "left": rec.left, "right": rec.right}))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_preferences(
    path: str | Path, trajectories: dict[str, Trajectory] | None = None
) -> PreferenceDataset:
    """Load records and resolve the referenced trajectory file (unless given)."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError(f"{path}:1: empty preference file")
    header = _parse_json(path, 1, lines[0])
    if trajectories is None:
        try:
            traj_file = header["trajectories"]
        except KeyError as exc:
            raise ParseError(f"{path}:1: header lacks 'trajectories'") from exc
        trajectories, _, _ = load_trajectories(path.parent / traj_file)
    records = []
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        obj = _parse_json(path, no, line)
        try:
            records.append(
                PreferenceRecord(
                    left=str(obj["left"]),
                    right=str(obj["right"]),
                    label=Preference(int(obj["label"])),
                )
            )
        except (KeyError, ValueError) as exc:
            raise ParseError(f"{path}:{no}: bad record ({exc})") from exc
    try:
        return PreferenceDataset(trajectories=trajectories, records=records)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _parse_json(path: Path, line_no: int, line: str):
    try:
        return json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from exc


def format_ablation_table(rows: Sequence[AblationRow]) -> str:
    """Tab-separated table with 6 significant digits."""
    out = ["parameter\tmean\tstderr\tn"]
    for row in rows:
        out.append(f"{row.parameter:.6g}\t{row.mean:.6g}\t{row.stderr:.6g}\t{row.n}")
    return "\n".join(out) + "\n"
