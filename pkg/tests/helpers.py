import math

import numpy as np

from prefalign.core import (
    LinearRewardModel,
    Preference,
    PreferenceDataset,
    PreferenceRecord,
    Trajectory,
)


def make_dataset(trajs, records):
    """trajs: {id: steps array}; records: (left, right, y) triples."""
    return PreferenceDataset(
        trajectories={tid: Trajectory(id=tid, steps=np.asarray(s, dtype=float)) for tid, s in trajs.items()},
        records=[PreferenceRecord(l, r, Preference(y)) for l, r, y in records],
    )


def random_dataset(rng, n_traj=8, n_pairs=10, dim=2, int_features=False, tie_prob=0.0):
    """Random trajectories plus randomly labeled distinct pairs (no duplicates)."""
    trajs = {}
    for k in range(n_traj):
        steps = rng.integers(-3, 4, size=(int(rng.integers(1, 6)), dim)).astype(float) \
            if int_features else rng.standard_normal((int(rng.integers(1, 6)), dim))
        trajs[f"t{k}"] = Trajectory(id=f"t{k}", steps=steps)
    pairs = [(i, j) for i in range(n_traj) for j in range(i + 1, n_traj)]
    rng.shuffle(pairs)
    records = []
    for i, j in pairs[:n_pairs]:
        y = 0 if rng.random() < tie_prob else (1 if rng.random() < 0.5 else -1)
        records.append(PreferenceRecord(f"t{i}", f"t{j}", Preference(y)))
    return PreferenceDataset(trajectories=trajs, records=records)


def brute_force_tau_b(data, model, tie_epsilon=0.0):
    """Independent pure-Python counter used as the oracle for the alignment score.

    Returns (score, counts) or raises ValueError on a degenerate denominator.
    """
    p = q = x0 = y0 = both = 0
    for rec in data.records:
        returns = []
        for tid in (rec.left, rec.right):
            total = 0.0
            for t, step in enumerate(data.trajectories[tid].steps):
                r = 0.0
                for wk, fk in zip(model.weights, step):
                    r += wk * fk
                total += model.gamma**t * r
            returns.append(total)
        delta = returns[0] - returns[1]
        if delta > tie_epsilon:
            ind = 1
        elif delta < -tie_epsilon:
            ind = -1
        else:
            ind = 0
        hum = rec.y
        if hum != 0 and ind != 0:
            if hum == ind:
                p += 1
            else:
                q += 1
        elif hum != 0:
            x0 += 1
        elif ind != 0:
            y0 += 1
        else:
            both += 1
    if p + q + x0 == 0 or p + q + y0 == 0:
        raise ValueError("degenerate")
    score = (p - q) / math.sqrt((p + q + x0) * (p + q + y0))
    return score, (p, q, x0, y0, both)


def central_diff_gradient(fn, weights, h=1e-6):
    """Central finite differences of a scalar function of the weight vector."""
    w = np.asarray(weights, dtype=float)
    grad = np.zeros_like(w)
    for k in range(len(w)):
        step = np.zeros_like(w)
        step[k] = h
        grad[k] = (fn(w + step) - fn(w - step)) / (2 * h)
    return grad
