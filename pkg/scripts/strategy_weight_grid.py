"""Grid search over the four query-heuristic weights.

Enumerates weight combinations from {0, 0.2, 0.4, 0.6, 0.8, 1} summing to 1,
scores each by mean Spearman correlation to the gold utility, and prints the
ranking.  Slow at full resolution; trim --clusters / --repetitions for a
quick look.
"""

import argparse
import itertools
import logging
import sys

import numpy as np

sys.path.insert(0, "src")

from prefsum.config import ExperimentConfig, child_seed
from prefsum.harness import load_corpus, make_oracle, prepare_cluster
from prefsum.metrics import spearman
from prefsum.querier import QueryWeights, Strategy
from prefsum.reward import Source, UtilityModel
from prefsum.sessions import AprilSession, drive_with_oracle


def weight_grid(step=0.2):
    values = [round(step * i, 1) for i in range(int(1 / step) + 1)]
    for combo in itertools.product(values, repeat=4):
        if abs(sum(combo) - 1.0) < 1e-9:
            yield combo


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--clusters", type=int, default=8)
    parser.add_argument("--repetitions", type=int, default=2)
    parser.add_argument("--rounds", type=int, default=10)
    parser.add_argument("--top", type=int, default=12)
    args = parser.parse_args()
    logging.basicConfig(level=logging.WARNING)

    config = ExperimentConfig(
        synthetic_clusters=args.clusters, db_size=250, feature_dim=64, seed=args.seed
    )
    prepared = [prepare_cluster(c, config) for c in load_corpus(config)]
    results = []
    for combo in weight_grid():
        weights = QueryWeights(*combo)
        scores = []
        for assets in prepared:
            for rep in range(args.repetitions):
                model = UtilityModel(assets.prior, beta=config.beta, dim=assets.space.dim)
                session = AprilSession(
                    assets.db, model, strategy=Strategy.AL, weights=weights,
                    n_rounds=args.rounds,
                    bt_learning_rate=config.pref_learning_rate,
                    gibbs_learning_rate=config.pref_learning_rate,
                    seed=child_seed(args.seed, "grid", assets.cluster.id, rep, combo),
                    source=Source.LNO,
                )
                oracle = make_oracle(config, assets.cluster,
                                     child_seed(args.seed, "grid-o", assets.cluster.id, rep, combo))
                drive_with_oracle(session, oracle)
                scores.append(spearman(model.blended_over_db(assets.db), assets.ustar))
        results.append((float(np.mean(scores)), combo))
        print(f"w_g={combo[0]} w_d={combo[1]} w_e={combo[2]} w_u={combo[3]}: {results[-1][0]:.4f}")
    results.sort(reverse=True)
    print(f"\ntop {args.top} combinations:")
    for score, combo in results[: args.top]:
        print(f"  {score:.4f}  w_g={combo[0]} w_d={combo[1]} w_e={combo[2]} w_u={combo[3]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
