"""Desk-scale experiment pipelines and deterministic report emission.

Three pipelines mirror the simulation studies: a query-strategy comparison
scored by Spearman correlation against the gold utility, an RL-algorithm
comparison, and the full interactive comparison of SPPI against the two-stage
pipeline with TD and neural-TD search.  Reports are byte-deterministic for a
fixed config and master seed; wall-clock timings are logged but never
serialized into reports.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .config import ExperimentConfig, child_seed
from .corpus import DocumentCluster, FeatureSpace, build_feature_space, load_cluster
from .metrics import gold_utility, rouge_l, rouge_n, rouge_su4, spearman, summary_tokens
from .oracle import LnoOracle, PerfectOracle, SummaryOracle
from .querier import Strategy
from .reward import HeuristicPrior, Source, UtilityModel, induced_ranking
from .rl import RlConfig, derive_policy, scaled_rank_reward, train_lstd, train_ntd, train_td
from .sessions import AprilSession, SppiSession, drive_with_oracle
from .summary_db import SummaryDB, generate_db
from .synthetic import synthetic_corpus

log = logging.getLogger(__name__)

SIGNIFICANCE_LEVEL = 0.01


@dataclass
class ReportRow:
    label: str
    metrics: dict[str, float]


@dataclass
class BudgetRow:
    label: str
    preferences: int
    shown: int


@dataclass
class SignificanceRow:
    left: str
    right: str
    metric: str
    p_value: float
    significant: bool


@dataclass
class RunReport:
    kind: str
    config_hash: str
    columns: list[str]
    rows: list[ReportRow] = field(default_factory=list)
    per_cluster: list[ReportRow] = field(default_factory=list)
    budgets: list[BudgetRow] = field(default_factory=list)
    significance: list[SignificanceRow] = field(default_factory=list)
    extras: dict[str, float] = field(default_factory=dict)
    # timings are diagnostics only and never serialized (reports must be
    # byte-identical across repeated runs)
    timings: dict[str, float] = field(default_factory=dict)


def emit_report(report: RunReport, fmt: str = "text-table") -> bytes:
    """Serialize a report deterministically as a text table or TSV."""
    if not report.rows:
        raise ValueError("report has no result rows")
    if fmt == "delimited":
        return _emit_delimited(report)
    if fmt == "text-table":
        return _emit_text_table(report)
    raise ValueError(f"unknown report format {fmt!r}")


def _emit_delimited(report: RunReport) -> bytes:
    lines = [
        f"kind\t{report.kind}",
        f"config_hash\t{report.config_hash}",
        "columns\tlabel\t" + "\t".join(report.columns),
    ]
    for section, rows in (("row", report.rows), ("cluster", report.per_cluster)):
        for row in rows:
            values = "\t".join(repr(row.metrics[c]) for c in report.columns)
            lines.append(f"{section}\t{row.label}\t{values}")
    for b in report.budgets:
        lines.append(f"budget\t{b.label}\t{b.preferences}\t{b.shown}")
    for s in report.significance:
        lines.append(
            f"sig\t{s.left}\t{s.right}\t{s.metric}\t{s.p_value!r}\t{int(s.significant)}"
        )
    for key in sorted(report.extras):
        lines.append(f"extra\t{key}\t{report.extras[key]!r}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _emit_text_table(report: RunReport) -> bytes:
    width = max([len(r.label) for r in report.rows] + [8])
    header = " | ".join([f"{'':{width}}"] + [f"{c:>10}" for c in report.columns])
    sep = "-" * len(header)
    lines = [f"kind: {report.kind}", f"config_hash: {report.config_hash}", header, sep]
    for row in report.rows:
        cells = [f"{row.label:{width}}"] + [f"{row.metrics[c]:10.4f}" for c in report.columns]
        lines.append(" | ".join(cells))
    if report.budgets:
        lines.append("")
        lines.append("budget accounting (label, preferences, shown):")
        for b in report.budgets:
            lines.append(f"  {b.label}: {b.preferences} preferences, {b.shown} summaries shown")
    if report.significance:
        lines.append("")
        lines.append(f"significance (Welch two-tailed t-test, p < {SIGNIFICANCE_LEVEL}):")
        for s in report.significance:
            marker = "*" if s.significant else " "
            lines.append(f" {marker} {s.left} vs {s.right} [{s.metric}]: p={s.p_value:.6f}")
    for key in sorted(report.extras):
        lines.append(f"extra {key}: {report.extras[key]!r}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_delimited(payload: bytes) -> dict:
    """Inverse of the delimited emitter, for round-trip checks and tooling."""
    out = {"rows": {}, "clusters": {}, "budgets": {}, "sig": [], "extras": {}}
    columns: list[str] = []
    for line in payload.decode("utf-8").splitlines():
        parts = line.split("\t")
        if parts[0] == "columns":
            columns = parts[2:]
        elif parts[0] in ("row", "cluster"):
            bucket = "rows" if parts[0] == "row" else "clusters"
            out[bucket][parts[1]] = {c: float(v) for c, v in zip(columns, parts[2:])}
        elif parts[0] == "budget":
            out["budgets"][parts[1]] = (int(parts[2]), int(parts[3]))
        elif parts[0] == "sig":
            out["sig"].append((parts[1], parts[2], parts[3], float(parts[4]), bool(int(parts[5]))))
        elif parts[0] == "extra":
            out["extras"][parts[1]] = float(parts[2])
        elif parts[0] in ("kind", "config_hash"):
            out[parts[0]] = parts[1]
    return out


# ---------------------------------------------------------------------------
# shared per-cluster assets


@dataclass
class ClusterAssets:
    cluster: DocumentCluster
    space: FeatureSpace
    db: SummaryDB
    prior: HeuristicPrior
    ustar: np.ndarray


def load_corpus(config: ExperimentConfig) -> list[DocumentCluster]:
    if config.corpus:
        return [load_cluster(path, length_limit=config.length_limit) for path in config.corpus]
    return synthetic_corpus(config.synthetic_clusters, config.seed, config.length_limit)


def prepare_cluster(cluster: DocumentCluster, config: ExperimentConfig) -> ClusterAssets:
    start = time.perf_counter()
    space = build_feature_space(cluster, dim=config.feature_dim)
    db = generate_db(
        cluster, space, size=config.db_size, seed=child_seed(config.seed, "db", cluster.id)
    )
    prior = HeuristicPrior(cluster, space)
    prior.fit(db)
    if not cluster.has_references:
        raise ValueError(f"cluster {cluster.id} has no references; gold utility unavailable")
    ustar = np.array(
        [gold_utility(summary_tokens(s, cluster), cluster.references) for s in db.summaries]
    )
    log.info("prepared cluster %s in %.1f ms", cluster.id, (time.perf_counter() - start) * 1e3)
    return ClusterAssets(cluster=cluster, space=space, db=db, prior=prior, ustar=ustar)


def make_oracle(config: ExperimentConfig, cluster: DocumentCluster, seed: int) -> SummaryOracle:
    if config.oracle == "perfect":
        return SummaryOracle(PerfectOracle(), cluster)
    if config.oracle == "lno":
        return SummaryOracle(LnoOracle(m=config.m, seed=seed), cluster)
    raise ValueError(f"unknown oracle kind {config.oracle!r}")


def rl_config_from(config: ExperimentConfig, episodes: int | None = None, kind: str | None = None) -> RlConfig:
    """Build the trainer config; the linear learners take the TD step size."""
    kind = kind or config.rl
    rate = config.rl_learning_rate if kind == "ntd" else config.td_learning_rate
    return RlConfig(
        episodes=episodes or config.episodes,
        sync_period=config.sync_period,
        learning_rate=rate,
        grad_clip=config.grad_clip,
        hidden_dim=config.hidden_dim,
    )


_TRAINERS = {"td": train_td, "lstd": train_lstd, "ntd": train_ntd}


def train_value_model(kind: str, assets: ClusterAssets, rewards: np.ndarray, rl_config: RlConfig, seed: int):
    try:
        trainer = _TRAINERS[kind]
    except KeyError:
        raise ValueError(f"unknown RL kind {kind!r}") from None
    return trainer(assets.cluster, assets.space, assets.db, rewards, rl_config, seed=seed)


def heuristic_baseline_summary(assets: ClusterAssets, config: ExperimentConfig, episodes: int | None = None):
    """No-interaction summary: value search against the prior-induced ranking.

    The blend with zero posterior weight reduces to the heuristic, so this is
    the shared zero-round output for every system; TD keeps it fast and
    deterministic.
    """
    model = UtilityModel(assets.prior, beta=0.0, dim=assets.space.dim)
    ranks = induced_ranking(model, assets.db)
    rewards = scaled_rank_reward(ranks, len(assets.db))
    seed = child_seed(config.seed, "baseline", assets.cluster.id)
    rl_config = rl_config_from(config, episodes=episodes, kind="td")
    value_model = train_td(assets.cluster, assets.space, assets.db, rewards, rl_config, seed=seed)
    return derive_policy(value_model, assets.cluster, assets.space, mode="greedy")


def run_april_pipeline(
    assets: ClusterAssets,
    config: ExperimentConfig,
    *,
    rl_kind: str,
    n_rounds: int,
    oracle: SummaryOracle,
    query_seed: int,
    rl_seed: int,
    strategy: Strategy | None = None,
    rl_config: RlConfig | None = None,
):
    """Interactive reward learning followed by value search; returns
    (summary, session) so callers can audit budgets and records."""
    model = UtilityModel(assets.prior, beta=config.beta, dim=assets.space.dim)
    session = AprilSession(
        assets.db,
        model,
        strategy=strategy or Strategy(config.strategy),
        weights=config.query_weights_for(config.strategy),
        n_rounds=n_rounds,
        bt_learning_rate=config.pref_learning_rate,
        gibbs_learning_rate=config.pref_learning_rate,
        seed=query_seed,
        source=oracle.source,
    )
    drive_with_oracle(session, oracle)
    model.fit_output_scale(assets.db)
    ranks = induced_ranking(model, assets.db)
    rewards = scaled_rank_reward(ranks, len(assets.db))
    value_model = train_value_model(
        rl_kind, assets, rewards, rl_config or rl_config_from(config, kind=rl_kind), rl_seed
    )
    summary = derive_policy(value_model, assets.cluster, assets.space, mode="greedy")
    return summary, session


def score_summary(summary, cluster: DocumentCluster) -> dict[str, float]:
    tokens = summary_tokens(summary, cluster)
    refs = cluster.references
    return {
        "r1": rouge_n(tokens, refs, 1),
        "r2": rouge_n(tokens, refs, 2),
        "rl": rouge_l(tokens, refs),
        "rsu4": rouge_su4(tokens, refs),
        "ustar": gold_utility(tokens, refs),
    }


def welch_test(a, b) -> float:
    return float(stats.ttest_ind(np.asarray(a), np.asarray(b), equal_var=False).pvalue)


# ---------------------------------------------------------------------------
# stage 1: query strategy comparison


_STRATEGY_KINDS = {
    "random": Strategy.RANDOM,
    "gibbs": Strategy.GIBBS,
    "jn": Strategy.JN,
    "gap": Strategy.AL,
    "div": Strategy.AL,
    "den": Strategy.AL,
    "unc": Strategy.AL,
    "best": Strategy.AL,
    "al": Strategy.AL,
}


def run_stage1(config: ExperimentConfig) -> RunReport:
    """Query-strategy comparison scored by Spearman correlation to gold utility."""
    report = RunReport(
        kind="stage1",
        config_hash=config.config_hash(),
        columns=[f"N={n}" for n in config.round_budgets],
    )
    clusters = load_corpus(config)
    samples: dict[tuple[str, int], list[float]] = {}
    lower_bounds: list[float] = []
    selection_ms: list[float] = []

    for cluster in clusters:
        assets = prepare_cluster(cluster, config)
        lower_bounds.append(float(spearman(assets.prior.values_over_db(assets.db), assets.ustar)))
        for rep in range(config.repetitions):
            for name in config.stage1_strategies:
                kind = _STRATEGY_KINDS.get(name)
                if kind is None:
                    raise ValueError(f"unknown strategy {name!r}")
                if kind is Strategy.JN:
                    log.warning("strategy jn requested: not implemented, skipped")
                    continue
                for n_rounds in config.round_budgets:
                    model = UtilityModel(assets.prior, beta=config.beta, dim=assets.space.dim)
                    session = AprilSession(
                        assets.db,
                        model,
                        strategy=kind,
                        weights=config.query_weights_for(name),
                        n_rounds=n_rounds,
                        bt_learning_rate=config.pref_learning_rate,
                        gibbs_learning_rate=config.pref_learning_rate,
                        seed=child_seed(config.seed, "query", cluster.id, rep, name, n_rounds),
                        source=Source.LNO if config.oracle == "lno" else Source.PERFECT,
                    )
                    oracle = make_oracle(
                        config,
                        cluster,
                        child_seed(config.seed, "oracle", cluster.id, rep, name, n_rounds),
                    )
                    drive_with_oracle(session, oracle)
                    selection_ms.extend(session.selection_ms)
                    rho = float(spearman(model.blended_over_db(assets.db), assets.ustar))
                    samples.setdefault((name, n_rounds), []).append(rho)
                    expected = n_rounds + 1 if kind is not Strategy.GIBBS else 2 * n_rounds
                    assert len(session.records) == n_rounds
                    if kind is not Strategy.GIBBS:
                        assert len(session.shown_ids) == expected

    lower = float(np.mean(lower_bounds))
    report.rows.append(
        ReportRow("lower-bound", {f"N={n}": lower for n in config.round_budgets})
    )
    for name in config.stage1_strategies:
        if _STRATEGY_KINDS.get(name) is Strategy.JN:
            continue
        metrics = {
            f"N={n}": float(np.mean(samples[(name, n)])) for n in config.round_budgets
        }
        report.rows.append(ReportRow(name, metrics))
    if "random" in config.stage1_strategies:
        for name in config.stage1_strategies:
            if name == "random" or _STRATEGY_KINDS.get(name) is Strategy.JN:
                continue
            for n_rounds in config.round_budgets:
                p = welch_test(samples[(name, n_rounds)], samples[("random", n_rounds)])
                report.significance.append(
                    SignificanceRow(name, "random", f"N={n_rounds}", p, p < SIGNIFICANCE_LEVEL)
                )
    if selection_ms:
        report.timings["query_selection_ms_max"] = max(selection_ms)
        report.timings["query_selection_ms_mean"] = float(np.mean(selection_ms))
        log.info(
            "query selection: mean %.2f ms, max %.2f ms",
            report.timings["query_selection_ms_mean"],
            report.timings["query_selection_ms_max"],
        )
    report.extras["lower_bound"] = lower
    return report


# ---------------------------------------------------------------------------
# stage 2: RL comparison with gold rewards


def run_rl_comparison(config: ExperimentConfig, kinds: tuple[str, ...] = ("td", "lstd", "ntd")) -> RunReport:
    """Train each value learner against the gold utility and score its summary."""
    metrics_order = ["r1", "r2", "rl", "rsu4", "ustar"]
    report = RunReport(
        kind="rl-comparison", config_hash=config.config_hash(), columns=metrics_order
    )
    clusters = load_corpus(config)
    per_kind: dict[str, dict[str, list[float]]] = {k: {m: [] for m in metrics_order} for k in kinds}
    for cluster in clusters:
        assets = prepare_cluster(cluster, config)
        for rep in range(config.repetitions):
            for kind in kinds:
                start = time.perf_counter()
                value_model = train_value_model(
                    kind,
                    assets,
                    assets.ustar,
                    rl_config_from(config, kind=kind),
                    child_seed(config.seed, "rl", cluster.id, rep, kind),
                )
                summary = derive_policy(value_model, assets.cluster, assets.space, mode="greedy")
                elapsed = time.perf_counter() - start
                report.timings[f"{kind}_train_s_max"] = max(
                    report.timings.get(f"{kind}_train_s_max", 0.0), elapsed
                )
                scores = score_summary(summary, cluster)
                for m in metrics_order:
                    per_kind[kind][m].append(scores[m])
    for kind in kinds:
        report.rows.append(
            ReportRow(kind, {m: float(np.mean(per_kind[kind][m])) for m in metrics_order})
        )
    for kind in kinds:
        if kind == "td":
            continue
        for m in metrics_order:
            p = welch_test(per_kind[kind][m], per_kind["td"][m])
            report.significance.append(
                SignificanceRow(kind, "td", m, p, p < SIGNIFICANCE_LEVEL)
            )
    return report


# ---------------------------------------------------------------------------
# full system comparison


def run_full(config: ExperimentConfig) -> RunReport:
    """SPPI against the two-stage systems across interaction budgets."""
    metrics_order = ["r1", "r2", "rl", "rsu4", "ustar"]
    report = RunReport(kind="full", config_hash=config.config_hash(), columns=metrics_order)
    clusters = load_corpus(config)

    samples: dict[tuple[str, int], dict[str, list[float]]] = {}
    budgets: dict[tuple[str, int], tuple[int, int]] = {}
    with_vs_without: list[tuple[float, float]] = []

    for cluster in clusters:
        assets = prepare_cluster(cluster, config)
        baseline = heuristic_baseline_summary(assets, config)
        baseline_scores = score_summary(baseline, cluster)
        cluster_with: list[float] = []
        for rep in range(config.repetitions):
            for system in config.systems:
                for n_rounds in config.round_budgets:
                    key = (system, n_rounds)
                    sink = samples.setdefault(key, {m: [] for m in metrics_order})
                    if n_rounds == 0:
                        scores = baseline_scores
                        budgets[key] = (0, 0)
                    elif system == "sppi":
                        session = SppiSession(
                            assets.db,
                            n_rounds=n_rounds,
                            gamma=config.sppi_learning_rate,
                            seed=child_seed(config.seed, "query", cluster.id, rep, system, n_rounds),
                            source=Source.LNO,
                        )
                        oracle = make_oracle(
                            config,
                            cluster,
                            child_seed(config.seed, "oracle", cluster.id, rep, system, n_rounds),
                        )
                        drive_with_oracle(session, oracle)
                        scores = score_summary(session.best_summary(), cluster)
                        budgets[key] = (len(session.records), 2 * n_rounds)
                    elif system in ("april-td", "april-ntd"):
                        rl_kind = system.split("-", 1)[1]
                        oracle = make_oracle(
                            config,
                            cluster,
                            child_seed(config.seed, "oracle", cluster.id, rep, system, n_rounds),
                        )
                        summary, session = run_april_pipeline(
                            assets,
                            config,
                            rl_kind=rl_kind,
                            n_rounds=n_rounds,
                            oracle=oracle,
                            query_seed=child_seed(config.seed, "query", cluster.id, rep, system, n_rounds),
                            rl_seed=child_seed(config.seed, "rl", cluster.id, rep, system, n_rounds),
                        )
                        scores = score_summary(summary, cluster)
                        budgets[key] = (len(session.records), len(session.shown_ids))
                        if system == "april-td":
                            cluster_with.append(scores["ustar"])
                    else:
                        raise ValueError(f"unknown system {system!r}")
                    for m in metrics_order:
                        sink[m].append(scores[m])
        if cluster_with:
            with_vs_without.append((float(np.mean(cluster_with)), baseline_scores["ustar"]))

    for system in config.systems:
        for n_rounds in config.round_budgets:
            key = (system, n_rounds)
            label = f"{system}@N={n_rounds}"
            report.rows.append(
                ReportRow(label, {m: float(np.mean(samples[key][m])) for m in metrics_order})
            )
            prefs, shown = budgets.get(key, (0, 0))
            report.budgets.append(BudgetRow(label, prefs, shown))
    for n_rounds in config.round_budgets:
        if "sppi" not in config.systems:
            continue
        for system in config.systems:
            if system == "sppi":
                continue
            for m in metrics_order:
                p = welch_test(
                    samples[(system, n_rounds)][m], samples[("sppi", n_rounds)][m]
                )
                report.significance.append(
                    SignificanceRow(
                        f"{system}@N={n_rounds}", f"sppi@N={n_rounds}", m, p, p < SIGNIFICANCE_LEVEL
                    )
                )
    if with_vs_without:
        improved = sum(1 for with_u, without_u in with_vs_without if with_u >= without_u)
        report.extras["fraction_with_ge_without"] = improved / len(with_vs_without)
    return report


# ---------------------------------------------------------------------------
# episode budget sweep


def run_episode_sweep(config: ExperimentConfig, budgets: tuple[int, ...] = (500, 1000, 2000, 3000)) -> RunReport:
    """Summary quality as a function of the training episode budget."""
    report = RunReport(
        kind="episode-sweep",
        config_hash=config.config_hash(),
        columns=["ustar", "r1"],
    )
    clusters = load_corpus(config)
    prepared = [prepare_cluster(cluster, config) for cluster in clusters]
    for episodes in budgets:
        values: dict[str, list[float]] = {"ustar": [], "r1": []}
        rl_cfg = rl_config_from(config, episodes=episodes)
        for assets in prepared:
            cluster = assets.cluster
            for rep in range(config.repetitions):
                oracle = make_oracle(
                    config, cluster, child_seed(config.seed, "oracle", cluster.id, rep, episodes)
                )
                summary, _ = run_april_pipeline(
                    assets,
                    config,
                    rl_kind=config.rl,
                    n_rounds=config.n_rounds,
                    oracle=oracle,
                    query_seed=child_seed(config.seed, "query", cluster.id, rep, episodes),
                    rl_seed=child_seed(config.seed, "rl", cluster.id, rep, episodes),
                    rl_config=rl_cfg,
                )
                scores = score_summary(summary, cluster)
                values["ustar"].append(scores["ustar"])
                values["r1"].append(scores["r1"])
        report.rows.append(
            ReportRow(
                f"T={episodes}",
                {m: float(np.mean(values[m])) for m in ("ustar", "r1")},
            )
        )
    return report
