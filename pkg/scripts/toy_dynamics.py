"""Per-record gradient dynamics on the five-item toy fixture.

Trains both losses with per-sample SGD (lr 0.1, 40 epochs) and prints the
weight trace plus each record's gradient magnitude per epoch, the text analog
of the gradient-behavior figures.
"""

import argparse

import numpy as np

from prefalign.core import LinearRewardModel
from prefalign.datalab import toy_fixture
from prefalign.losses import cross_entropy_loss, soft_tac_loss
from prefalign.trainer import LossKind, OptimizerKind, TrainConfig, train


def gradient_row(kind, weights, data):
    model = LinearRewardModel(weights=weights)
    loss = soft_tac_loss if kind is LossKind.SOFT_TAC else cross_entropy_loss
    return [
        float(np.linalg.norm(loss(model, data, records=[rec]).gradient))
        for rec in data.records
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--noisy", action="store_true", default=True)
    parser.add_argument("--clean", dest="noisy", action="store_false")
    args = parser.parse_args()

    data = toy_fixture(noisy=args.noisy)
    labels = [f"({r.left[-1]},{r.right[-1]},{r.y:+d})" for r in data.records]
    for kind in (LossKind.SOFT_TAC, LossKind.CROSS_ENTROPY):
        cfg = TrainConfig(
            loss_kind=kind,
            learning_rate=0.1,
            batch_size=1,
            max_epochs=40,
            optimizer=OptimizerKind.SGD,
            seed=args.seed,
        )
        run = train(data, cfg)
        print(f"\n=== {kind.value} ===")
        print("epoch\tweight\t" + "\t".join(labels))
        for epoch, stats in enumerate(run.epoch_trace, start=1):
            grads = gradient_row(kind, stats.weights, data)
            cells = "\t".join(f"{g:.4g}" for g in grads)
            print(f"{epoch}\t{stats.weights[0]:.4f}\t{cells}")
        print(f"final weight: {run.final_weights[0]:.4f}")


if __name__ == "__main__":
    main()
