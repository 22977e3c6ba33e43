"""Exploration script: stage-1 learning dynamics on the synthetic corpus.

Prints the heuristic lower bound and per-strategy Spearman means so learning
rates and generator parameters can be sanity-checked quickly.
"""

import sys
import time

import numpy as np

sys.path.insert(0, "src")

from prefsum.config import child_seed
from prefsum.metrics import spearman, summary_tokens, gold_utility
from prefsum.oracle import LnoOracle, SummaryOracle
from prefsum.querier import Strategy
from prefsum.reward import HeuristicPrior, Source, UtilityModel
from prefsum.sessions import AprilSession, drive_with_oracle
from prefsum.summary_db import generate_db
from prefsum.synthetic import synthetic_cluster
from prefsum.corpus import build_feature_space
from prefsum.config import ExperimentConfig


def main(n_clusters=20, db_size=300, dim=64, budgets=(10, 50), reps=2, alpha=2.0, master=0):
    cfg = ExperimentConfig()
    strategies = {
        "random": (Strategy.RANDOM, None),
        "gibbs": (Strategy.GIBBS, None),
        "gap": (Strategy.AL, cfg.query_weights_for("gap")),
        "div": (Strategy.AL, cfg.query_weights_for("div")),
        "den": (Strategy.AL, cfg.query_weights_for("den")),
        "unc": (Strategy.AL, cfg.query_weights_for("unc")),
    }
    lower_bounds = []
    results = {(name, n): [] for name in strategies for n in budgets}
    t0 = time.time()
    for ci in range(n_clusters):
        cluster = synthetic_cluster(f"syn-{ci:03d}", seed=child_seed(master, "synthetic", ci))
        space = build_feature_space(cluster, dim=dim)
        db = generate_db(cluster, space, size=db_size, seed=child_seed(master, "db", ci))
        ustar = np.array([gold_utility(summary_tokens(s, cluster), cluster.references) for s in db.summaries])
        prior = HeuristicPrior(cluster, space)
        prior.fit(db)
        h_vec = prior.values_over_db(db)
        lower_bounds.append(spearman(h_vec, ustar))
        for rep in range(reps):
            for name, (strat, weights) in strategies.items():
                for n in budgets:
                    model = UtilityModel(prior, beta=0.5, dim=dim)
                    session = AprilSession(
                        db, model, strategy=strat, weights=weights, n_rounds=n,
                        bt_learning_rate=alpha, gibbs_learning_rate=alpha,
                        seed=child_seed(master, "query", ci, rep, name, n),
                        source=Source.LNO,
                    )
                    oracle = SummaryOracle(
                        LnoOracle(m=2.14, seed=child_seed(master, "oracle", ci, rep, name, n)),
                        cluster,
                    )
                    drive_with_oracle(session, oracle)
                    results[(name, n)].append(spearman(model.blended_over_db(db), ustar))
    print(f"lower bound (Û=h): {np.mean(lower_bounds):.4f}  (per-cluster range {min(lower_bounds):.3f}..{max(lower_bounds):.3f})")
    for n in budgets:
        print(f"-- N={n}")
        for name in strategies:
            vals = results[(name, n)]
            print(f"   {name:7s} {np.mean(vals):.4f} +- {np.std(vals)/np.sqrt(len(vals)):.4f}")
    print(f"elapsed {time.time()-t0:.1f}s")


if __name__ == "__main__":
    alpha = float(sys.argv[1]) if len(sys.argv) > 1 else 2.0
    master = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    main(alpha=alpha, master=master)
