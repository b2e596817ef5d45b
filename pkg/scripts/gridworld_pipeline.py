"""Run the preferences -> learned reward -> policy pipeline on a gridworld.

Prints the learned weights next to the expert's, the alignment of the learned
reward on the training pairs, and both policies' goal-reaching success rates.
"""

import argparse

import numpy as np

from prefalign.envlab import PipelineConfig, builtin_world, end_to_end, load_world
from prefalign.trainer import LossKind, TrainConfig

EXPERT = np.array([10.0, -8.0, -0.5, 1.0, -1.0, -2.0])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--world", default="open7x7", help="builtin name or a world file path")
    parser.add_argument("--loss", choices=[k.value for k in LossKind], default="soft-tac")
    parser.add_argument("--preferences", type=int, default=148)
    parser.add_argument("--seed", type=int, default=5)
    args = parser.parse_args()

    try:
        world = builtin_world(args.world)
    except FileNotFoundError:
        world = load_world(args.world)
    config = PipelineConfig(
        num_preferences=args.preferences,
        seed=args.seed,
        train=TrainConfig(
            loss_kind=LossKind(args.loss),
            learning_rate=0.05,
            batch_size=16,
            max_epochs=300,
            seed=args.seed,
            gamma=world.gamma,
        ),
    )
    report = end_to_end(world, EXPERT, config)
    print("feature\texpert\tlearned")
    for name, e, l in zip(world.feature_names, EXPERT, report.learned_model.weights):
        print(f"{name}\t{e:+.3f}\t{l:+.3f}")
    print(f"\nalignment of learned reward on training pairs: {report.tac_learned:.4f}")
    print(f"success rate (learned reward policy): {report.success_learned:.3f}")
    print(f"success rate (expert reward policy):  {report.success_expert:.3f}")


if __name__ == "__main__":
    main()
