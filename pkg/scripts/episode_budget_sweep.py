"""Summary quality as a function of the RL episode budget.

Runs the interactive pipeline at several training budgets and prints the
report; quality should grow with the budget.
"""

import argparse
import logging
import sys

sys.path.insert(0, "src")

from prefsum.config import ExperimentConfig
from prefsum.harness import emit_report, run_episode_sweep


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--clusters", type=int, default=6)
    parser.add_argument("--repetitions", type=int, default=2)
    parser.add_argument("--budgets", default="500,1000,2000,3000")
    parser.add_argument("--rl", default="td")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO)
    config = ExperimentConfig(
        synthetic_clusters=args.clusters,
        db_size=250,
        feature_dim=64,
        repetitions=args.repetitions,
        rl=args.rl,
        seed=args.seed,
    )
    budgets = tuple(int(x) for x in args.budgets.split(","))
    report = run_episode_sweep(config, budgets=budgets)
    sys.stdout.buffer.write(emit_report(report, "text-table"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
