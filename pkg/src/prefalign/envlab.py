"""Self-contained gridworld with per-transition indicator features, an exact
value-iteration planner, and an end-to-end preferences -> reward -> policy
pipeline.

Cells are EMPTY, GOAL, HAZARD, or WALL; GOAL and HAZARD are terminal. Moves
blocked by walls or the boundary leave the agent in place (a "bump"). With
slip probability p the executed action is replaced by one of the two
perpendicular actions (p/2 each).
"""

from __future__ import annotations

import importlib.resources
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from functools import cached_property
from pathlib import Path

import numpy as np

from .core import LinearRewardModel, PreferenceDataset, Trajectory, discounted_return
from .datalab import pair_dataset_from_trajectories
from .trainer import TrainConfig, TrainRun, train


class Terrain(Enum):
    EMPTY = "."
    GOAL = "G"
    HAZARD = "H"
    WALL = "#"


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


_MOVES = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}
_PERPENDICULAR = {
    Action.UP: (Action.LEFT, Action.RIGHT),
    Action.DOWN: (Action.LEFT, Action.RIGHT),
    Action.LEFT: (Action.UP, Action.DOWN),
    Action.RIGHT: (Action.UP, Action.DOWN),
}

FEATURE_NAMES = (
    "reached_goal",
    "entered_hazard",
    "step_taken",
    "moved_toward_goal",
    "moved_away_from_goal",
    "wall_bump",
)

Cell = tuple[int, int]


@dataclass(frozen=True)
class Gridworld:
    width: int
    height: int
    terrain: tuple[tuple[Terrain, ...], ...]
    starts: tuple[Cell, ...]
    max_steps: int = 50
    gamma: float = 0.95
    slip: float = 0.0
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        goals = [c for c in self.cells() if self.at(c) is Terrain.GOAL]
        if not goals:
            raise ValueError("world has no goal cell")
        for c in self.starts:
            if self.at(c) is not Terrain.EMPTY:
                raise ValueError(f"start cell {c} is not empty terrain")
        unknown = set(self.feature_names) - set(FEATURE_NAMES)
        if unknown:
            raise ValueError(f"unknown features: {sorted(unknown)}")
        if not (0.0 <= self.slip <= 1.0):
            raise ValueError("slip must lie in [0, 1]")

    @cached_property
    def goal_distances(self) -> dict[Cell, float]:
        return _goal_distances(self)

    @property
    def dim(self) -> int:
        return len(self.feature_names)

    def cells(self):
        return ((r, c) for r in range(self.height) for c in range(self.width))

    def at(self, cell: Cell) -> Terrain:
        return self.terrain[cell[0]][cell[1]]

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def is_terminal(self, cell: Cell) -> bool:
        return self.at(cell) in (Terrain.GOAL, Terrain.HAZARD)

    def move(self, cell: Cell, action: Action) -> Cell:
        dr, dc = _MOVES[action]
        target = (cell[0] + dr, cell[1] + dc)
        if not self.in_bounds(target) or self.at(target) is Terrain.WALL:
            return cell
        return target

    def outcomes(self, cell: Cell, action: Action) -> list[tuple[float, Cell]]:
        """Slip-weighted successor distribution."""
        if self.slip == 0.0:
            return [(1.0, self.move(cell, action))]
        a, b = _PERPENDICULAR[action]
        return [
            (1.0 - self.slip, self.move(cell, action)),
            (self.slip / 2.0, self.move(cell, a)),
            (self.slip / 2.0, self.move(cell, b)),
        ]

    def features(self, cell: Cell, action: Action, nxt: Cell) -> np.ndarray:
        dist = self.goal_distances
        values = {
            "reached_goal": float(self.at(nxt) is Terrain.GOAL),
            "entered_hazard": float(self.at(nxt) is Terrain.HAZARD),
            "step_taken": 1.0,
            "moved_toward_goal": 0.0,
            "moved_away_from_goal": 0.0,
            "wall_bump": float(nxt == cell),
        }
        d0, d1 = dist.get(cell, np.inf), dist.get(nxt, np.inf)
        if np.isfinite(d0) and np.isfinite(d1):
            if d1 < d0:
                values["moved_toward_goal"] = 1.0
            elif d1 > d0:
                values["moved_away_from_goal"] = 1.0
        return np.array([values[name] for name in self.feature_names])


def _goal_distances(world: Gridworld) -> dict[Cell, float]:
    """BFS hop count to the nearest goal, avoiding walls and hazards."""
    dist: dict[Cell, float] = {}
    queue: deque[Cell] = deque()
    for cell in world.cells():
        if world.at(cell) is Terrain.GOAL:
            dist[cell] = 0.0
            queue.append(cell)
    while queue:
        cell = queue.popleft()
        for action in Action:
            dr, dc = _MOVES[action]
            prev = (cell[0] - dr, cell[1] - dc)
            if (
                world.in_bounds(prev)
                and world.at(prev) not in (Terrain.WALL, Terrain.HAZARD)
                and prev not in dist
            ):
                dist[prev] = dist[cell] + 1.0
                queue.append(prev)
    return dist


@dataclass(frozen=True)
class TabularPolicy:
    """Greedy action per non-terminal cell plus the converged value table."""

    actions: dict[Cell, Action]
    values: dict[Cell, float]

    def action(self, cell: Cell) -> Action:
        return self.actions[cell]


def value_iteration(
    world: Gridworld, model: LinearRewardModel, tol: float = 1e-9
) -> TabularPolicy:
    """Exact planning; Bellman residual below tol on exit.

    Requires gamma < 1 unless every start is guaranteed to terminate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if model.dim != world.dim:
        raise ValueError(f"model dim {model.dim} != world feature dim {world.dim}")
    if world.gamma >= 1.0:
        raise ValueError("value iteration needs gamma < 1 for guaranteed convergence")
    states = [c for c in world.cells() if world.at(c) is not Terrain.WALL]
    live = [c for c in states if not world.is_terminal(c)]
    transitions = _compiled_transitions(world, model, live)
    values = {c: 0.0 for c in states}
    while True:
        values, residual = bellman_sweep(world, transitions, values, live)
        if residual < tol:
            break
    actions: dict[Cell, Action] = {}
    for cell in live:
        best_q, best_a = -np.inf, Action.UP
        for action in Action:  # fixed order breaks ties deterministically
            q = _q_value(world, transitions[(cell, action)], values)
            if q > best_q:
                best_q, best_a = q, action
        actions[cell] = best_a
    return TabularPolicy(actions=actions, values=values)


def _compiled_transitions(world, model, live):
    out: dict[tuple[Cell, Action], list[tuple[float, Cell, float]]] = {}
    for cell in live:
        for action in Action:
            out[(cell, action)] = [
                (p, nxt, float(model.weights @ world.features(cell, action, nxt)))
                for p, nxt in world.outcomes(cell, action)
            ]
    return out


def _q_value(world, outcomes, values) -> float:
    q = 0.0
    for p, nxt, r in outcomes:
        cont = 0.0 if world.is_terminal(nxt) else values[nxt]
        q += p * (r + world.gamma * cont)
    return q


def bellman_sweep(world, transitions, values, live) -> tuple[dict[Cell, float], float]:
    """One synchronous sweep; returns (new values, sup-norm residual)."""
    new_values = dict(values)
    residual = 0.0
    for cell in live:
        best = max(_q_value(world, transitions[(cell, a)], values) for a in Action)
        residual = max(residual, abs(best - values[cell]))
        new_values[cell] = best
    return new_values, residual


def _episode(
    world: Gridworld,
    policy: TabularPolicy,
    exploration_rate: float,
    rng: np.random.Generator,
    traj_id: str,
) -> Trajectory:
    start = world.starts[int(rng.integers(len(world.starts)))]
    cell = start
    steps = []
    outcome = "timeout"
    for _ in range(world.max_steps):
        if exploration_rate > 0 and rng.random() < exploration_rate:
            action = Action(int(rng.integers(4)))
        else:
            action = policy.action(cell)
        if world.slip > 0 and rng.random() < world.slip:
            action = _PERPENDICULAR[action][int(rng.integers(2))]
        nxt = world.move(cell, action)
        steps.append(world.features(cell, action, nxt))
        cell = nxt
        if world.is_terminal(cell):
            outcome = "goal" if world.at(cell) is Terrain.GOAL else "hazard"
            break
    return Trajectory(
        id=traj_id,
        steps=np.array(steps),
        metadata={"start": f"{start[0]},{start[1]}", "outcome": outcome},
    )


def rollout(
    world: Gridworld,
    policy: TabularPolicy,
    exploration_rate: float = 0.0,
    seed: int = 0,
    count: int = 1,
) -> list[Trajectory]:
    """Simulate episodes with epsilon-greedy deviations; deterministic per seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    return [
        _episode(world, policy, exploration_rate, rng, f"ep-{seed}-{k:04d}")
        for k in range(count)
    ]


def success_rate(
    world: Gridworld, policy: TabularPolicy, episodes: int = 100, seed: int = 0
) -> float:
    """Fraction of greedy episodes that terminate on a goal cell."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    trajs = rollout(world, policy, exploration_rate=0.0, seed=seed, count=episodes)
    return sum(t.metadata["outcome"] == "goal" for t in trajs) / episodes


# --- world files -----------------------------------------------------------

_CHAR_TERRAIN = {t.value: t for t in Terrain} | {"S": Terrain.EMPTY}


def parse_world(text: str) -> Gridworld:
    """Key-value header, blank line, then the character grid (S marks starts)."""
    header: dict[str, str] = {}
    lines = text.splitlines()
    i = 0
    for i, line in enumerate(lines):
        if not line.strip():
            break
        if line.lstrip().startswith("#"):
            continue
        key, _, value = line.partition(":")
        if not _:
            raise ValueError(f"world header line {i + 1}: expected 'key: value'")
        header[key.strip()] = value.strip()
    grid_rows = [row for row in lines[i + 1 :] if row.strip()]
    if not grid_rows:
        raise ValueError("world file has no grid")
    terrain, starts = [], []
    for r, row in enumerate(grid_rows):
        cells = []
        for c, ch in enumerate(row):
            if ch not in _CHAR_TERRAIN:
                raise ValueError(f"unknown terrain {ch!r} at row {r}, col {c}")
            if ch == "S":
                starts.append((r, c))
            cells.append(_CHAR_TERRAIN[ch])
        terrain.append(tuple(cells))
    height, width = len(terrain), len(terrain[0])
    if any(len(row) != width for row in terrain):
        raise ValueError("ragged grid rows")
    if "width" in header and int(header["width"]) != width:
        raise ValueError(f"header width {header['width']} != grid width {width}")
    if "height" in header and int(header["height"]) != height:
        raise ValueError(f"header height {header['height']} != grid height {height}")
    feature_names = FEATURE_NAMES
    if header.get("features", "default") != "default":
        feature_names = tuple(name.strip() for name in header["features"].split(","))
    return Gridworld(
        width=width,
        height=height,
        terrain=tuple(terrain),
        starts=tuple(starts),
        max_steps=int(header.get("max_steps", 50)),
        gamma=float(header.get("gamma", 0.95)),
        slip=float(header.get("slip", 0.0)),
        feature_names=feature_names,
    )


def load_world(path: str | Path) -> Gridworld:
    return parse_world(Path(path).read_text(encoding="utf-8"))


def builtin_world(name: str) -> Gridworld:
    """Shipped fixtures: 'open7x7' or 'hazard5x5'."""
    resource = importlib.resources.files("prefalign").joinpath(f"worlds/{name}.world")
    return parse_world(resource.read_text(encoding="utf-8"))


# --- end-to-end pipeline ----------------------------------------------------


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage


@dataclass(frozen=True)
class PipelineConfig:
    num_preferences: int = 148
    exploration_rates: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0)
    episodes_per_rate: int = 12
    eval_episodes: int = 100
    tie_epsilon: float = 1e-9
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)


@dataclass
class EndToEndReport:
    dataset: PreferenceDataset
    train_run: TrainRun
    learned_model: LinearRewardModel
    tac_learned: float
    success_learned: float
    success_expert: float


def end_to_end(
    world: Gridworld, expert_weights: np.ndarray, config: PipelineConfig
) -> EndToEndReport:
    """Rollouts -> expert-labeled pairs -> reward learning -> planning -> evaluation."""
    from .alignment import tac as tac_op  # local import to avoid cycle at module load

    expert = LinearRewardModel(weights=expert_weights, gamma=world.gamma)
    try:
        expert_policy = value_iteration(world, expert)
    except Exception as exc:
        raise PipelineError("plan-expert", exc) from exc
    try:
        pool: list[Trajectory] = []
        for k, rate in enumerate(config.exploration_rates):
            episodes = rollout(
                world,
                expert_policy,
                exploration_rate=rate,
                seed=config.seed * 1000 + k,
                count=config.episodes_per_rate,
            )
            pool.extend(
                Trajectory(
                    id=f"rate{k}-{t.id}",
                    steps=t.steps,
                    metadata=dict(t.metadata, exploration=str(rate)),
                )
                for t in episodes
            )
    except Exception as exc:
        raise PipelineError("rollouts", exc) from exc
    try:
        dataset = pair_dataset_from_trajectories(
            pool,
            expert,
            num_preferences=config.num_preferences,
            seed=config.seed,
            tie_epsilon=config.tie_epsilon,
            resample_ties=True,
        )
    except Exception as exc:
        raise PipelineError("label-pairs", exc) from exc
    try:
        run = train(dataset, config.train)
    except Exception as exc:
        raise PipelineError("train", exc) from exc
    learned = LinearRewardModel(weights=run.final_weights, gamma=world.gamma)
    try:
        learned_policy = value_iteration(world, learned)
    except Exception as exc:
        raise PipelineError("plan-learned", exc) from exc
    try:
        report = EndToEndReport(
            dataset=dataset,
            train_run=run,
            learned_model=learned,
            tac_learned=tac_op(dataset, learned).tac,
            success_learned=success_rate(
                world, learned_policy, config.eval_episodes, seed=config.seed + 1
            ),
            success_expert=success_rate(
                world, expert_policy, config.eval_episodes, seed=config.seed + 1
            ),
        )
    except Exception as exc:
        raise PipelineError("evaluate", exc) from exc
    return report


def trajectory_returns(
    world: Gridworld, model: LinearRewardModel, trajs: list[Trajectory]
) -> np.ndarray:
    return np.array([discounted_return(model, t) for t in trajs])
