"""Command-line interface.

Subcommands: ``gen-db``, ``simulate-stage1``, ``simulate-full``, ``train-rl``,
``fit-noise`` and ``serve``.  Simulation commands read a flat key=value config
file; every config key is also exposed as a ``--key value`` flag, with flags
winning over the file.  ``--seed`` is mandatory for simulate commands.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig, build_config, load_config_file

log = logging.getLogger(__name__)


def _add_config_flags(parser: argparse.ArgumentParser, require_seed: bool) -> None:
    parser.add_argument("--config", type=Path, default=None, help="flat key=value config file")
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == "seed":
            continue
        parser.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, default=None)
    parser.add_argument("--seed", type=int, required=require_seed, default=None)
    parser.add_argument("--format", dest="report_format", default=None, choices=["text-table", "delimited"])
    parser.add_argument("--out", type=Path, default=None, help="write the report here instead of stdout")


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {}
    for f in dataclasses.fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value if isinstance(value, str) else str(value)
    return build_config(file_values, overrides)


def _emit(report, config, out_path) -> None:
    from .harness import emit_report

    payload = emit_report(report, config.report_format)
    if out_path:
        Path(out_path).write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)


def cmd_gen_db(args) -> int:
    from .corpus import build_feature_space, load_cluster
    from .summary_db import generate_db, persist_db

    cluster = load_cluster(args.cluster, length_limit=args.length_limit)
    space = build_feature_space(cluster, dim=args.dim)
    db = generate_db(cluster, space, size=args.size, seed=args.seed)
    persist_db(db, args.out)
    log.info("wrote %d candidates for cluster %s to %s", len(db), cluster.id, args.out)
    return 0


def cmd_simulate_stage1(args) -> int:
    from .harness import run_stage1

    config = _config_from_args(args)
    report = run_stage1(config)
    _emit(report, config, args.out)
    return 0


def cmd_simulate_full(args) -> int:
    from .harness import run_full

    config = _config_from_args(args)
    report = run_full(config)
    _emit(report, config, args.out)
    return 0


def cmd_train_rl(args) -> int:
    import numpy as np

    from .corpus import build_feature_space, load_cluster
    from .harness import rl_config_from
    from .reward import HeuristicPrior, UtilityModel, bt_update, induced_ranking, load_preferences
    from .rl import derive_policy, save_value_model, scaled_rank_reward
    from .harness import train_value_model, ClusterAssets
    from .metrics import gold_utility, summary_tokens
    from .summary_db import load_db

    config = _config_from_args(args)
    cluster = load_cluster(args.cluster, length_limit=config.length_limit)
    space = build_feature_space(cluster, dim=config.feature_dim)
    db = load_db(args.db, cluster, space)
    prior = HeuristicPrior(cluster, space)
    prior.fit(db)
    model = UtilityModel(prior, beta=config.beta, dim=space.dim)
    if args.prefs:
        _, _, records = load_preferences(args.prefs)
        for record in records:
            bt_update(model, record, db, config.pref_learning_rate)
    model.fit_output_scale(db)
    ranks = induced_ranking(model, db)
    rewards = scaled_rank_reward(ranks, len(db))
    assets = ClusterAssets(cluster=cluster, space=space, db=db, prior=prior, ustar=np.zeros(len(db)))
    value_model = train_value_model(config.rl, assets, rewards, rl_config_from(config), config.seed)
    save_value_model(value_model, args.out, config_hash=config.config_hash())
    summary = derive_policy(value_model, cluster, space, mode="greedy")
    text = " ".join(summary_tokens(summary, cluster))
    print(f"model written to {args.out}")
    print(f"summary ({summary.token_count} tokens): {text}")
    if cluster.has_references:
        print(f"gold utility: {gold_utility(summary_tokens(summary, cluster), cluster.references):.3f}")
    return 0


def cmd_fit_noise(args) -> int:
    from .oracle import fit_m
    from .reward import Direction

    records = []
    for line_no, line in enumerate(Path(args.input).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise SystemExit(f"{args.input}:{line_no}: expected u_left<TAB>u_right<TAB>direction")
        records.append((float(parts[0]), float(parts[1]), Direction(parts[2])))
    fitted = fit_m(records)
    print(f"fitted flatness m = {fitted:.4f} ({len(records)} records)")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceSettings, create_app

    settings = ServiceSettings.from_env(
        corpus_root=args.corpus_root,
        sessions_dir=args.sessions_dir,
        db_cache_dir=args.db_cache,
        port=args.port,
        rl=args.rl,
        episodes=args.episodes,
        db_size=args.db_size,
        feature_dim=args.dim,
        blind_mode=not args.no_blind,
    )
    app = create_app(settings)
    uvicorn.run(app, host=args.host, port=settings.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prefsum", description="preference-based interactive summarisation toolkit"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-db", help="generate and persist a candidate summary pool")
    p.add_argument("--cluster", type=Path, required=True)
    p.add_argument("--size", type=int, default=5000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dim", type=int, default=200)
    p.add_argument("--length-limit", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_gen_db)

    p = sub.add_parser("simulate-stage1", help="query-strategy comparison with a simulated user")
    _add_config_flags(p, require_seed=True)
    p.set_defaults(func=cmd_simulate_stage1)

    p = sub.add_parser("simulate-full", help="full interactive comparison with a simulated user")
    _add_config_flags(p, require_seed=True)
    p.set_defaults(func=cmd_simulate_full)

    p = sub.add_parser("train-rl", help="train a value model against stored preferences")
    _add_config_flags(p, require_seed=True)
    p.add_argument("--cluster", type=Path, required=True)
    p.add_argument("--db", type=Path, required=True)
    p.add_argument("--prefs", type=Path, default=None)
    p.set_defaults(func=cmd_train_rl)

    p = sub.add_parser("fit-noise", help="fit the logistic noise flatness from preference records")
    p.add_argument("--input", type=Path, required=True)
    p.set_defaults(func=cmd_fit_noise)

    p = sub.add_parser("serve", help="run the live preference-session HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--corpus-root", type=Path, default=None)
    p.add_argument("--sessions-dir", type=Path, default=None)
    p.add_argument("--db-cache", type=Path, default=None)
    p.add_argument("--rl", default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--db-size", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--no-blind", action="store_true", help="expose gold utilities in results")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
