"""Clean-set alignment of both losses as the label-corruption rate grows.

For each corruption rate, trains on noisy labels over several seeds and
reports the mean alignment of the learned weights on the clean labels.
"""

import argparse

import numpy as np

from prefalign.alignment import tac
from prefalign.core import LinearRewardModel
from prefalign.datalab import NoiseSpec, SyntheticSpec, corrupt_labels, generate_synthetic
from prefalign.trainer import LossKind, TrainConfig, train


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rates", default="0.0,0.1,0.2,0.3,0.4,0.5,0.6")
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--dim", type=int, default=2)
    parser.add_argument("--preferences", type=int, default=148)
    args = parser.parse_args()

    rates = [float(x) for x in args.rates.split(",")]
    print("rate\tsoft_mean\tsoft_se\tce_mean\tce_se")
    for rate in rates:
        scores = {LossKind.SOFT_TAC: [], LossKind.CROSS_ENTROPY: []}
        for seed in range(args.seeds):
            spec = SyntheticSpec(
                dim=args.dim,
                num_trajectories=40,
                num_preferences=args.preferences,
                true_weights=np.random.default_rng(seed + 7000).standard_normal(args.dim),
                tie_epsilon=0.3,
                resample_ties=True,
                seed=seed + 300,
            )
            clean = generate_synthetic(spec)
            noisy, _ = corrupt_labels(clean, NoiseSpec(rate=rate, seed=seed + 600))
            for kind in scores:
                run = train(noisy, TrainConfig(loss_kind=kind, seed=seed, max_epochs=500))
                model = LinearRewardModel(weights=run.final_weights, gamma=spec.gamma)
                scores[kind].append(tac(clean, model).tac)
        row = [f"{rate:g}"]
        for kind in (LossKind.SOFT_TAC, LossKind.CROSS_ENTROPY):
            vals = np.array(scores[kind])
            row += [f"{vals.mean():.4f}", f"{vals.std(ddof=1) / np.sqrt(len(vals)):.4f}"]
        print("\t".join(row))


if __name__ == "__main__":
    main()
