"""Command-line front end: ``run``, ``compare``, ``report`` and ``datasets``.

Exit codes: 0 success, 2 configuration or input error, 3 audit-log I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import baselines, orchestrator
from .agents import HeuristicDecider, HeuristicRecommender, RunGoals
from .data import BUILTIN_DATASETS, DataError, builtin, load_csv
from .llm import (
    ConfigurationError,
    LiveTransport,
    LLMDecider,
    LLMRecommender,
    RecordReplayTransport,
    TransportConfig,
)
from .search_space import FAMILY_ORDER, ModelFamily

EXIT_OK, EXIT_CONFIG, EXIT_LOG = 0, 2, 3

# defaults: 5-fold CV, 10 iterations, fixed seed
RUN_DEFAULTS = {
    "dataset": None,
    "label_column": "target",
    "models": [f.value for f in FAMILY_ORDER],
    "target_accuracy": 0.98,
    "max_iterations": 10,
    "exploration_ratio_threshold": 0.5,
    "min_trials": 5,
    "patience": 3,
    "k_folds": 5,
    "seed": 0,
    "agent_backend": "heuristic",
    "transport": {},
}


class UsageError(Exception):
    pass


class ArgParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _models(text):
    return [m.strip() for m in text.split(",") if m.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = ArgParser(prog="mahpo", description="Multi-agent hyperparameter optimization")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgParser)

    run = sub.add_parser("run", help="run one multi-agent optimization")
    run.add_argument("--config", type=Path, help="JSON run configuration; flags override it")
    run.add_argument("--dataset", help="builtin name or path to a CSV file")
    run.add_argument("--label-column", dest="label_column")
    run.add_argument("--model", dest="models", action="append", type=_models,
                     help="allowed model family (repeatable or comma separated)")
    run.add_argument("--target-accuracy", dest="target_accuracy", type=float)
    run.add_argument("--max-iterations", dest="max_iterations", type=int)
    run.add_argument("--exploration-ratio", dest="exploration_ratio_threshold", type=float)
    run.add_argument("--min-trials", dest="min_trials", type=int)
    run.add_argument("--patience", type=int)
    run.add_argument("--k-folds", dest="k_folds", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--agents", dest="agent_backend", choices=["heuristic", "llm"])
    run.add_argument("--endpoint", help="chat-completion URL (llm backend)")
    run.add_argument("--model-name", help="LLM model name (llm backend)")
    run.add_argument("--api-key-env", help="environment variable holding the API key")
    run.add_argument("--record", type=Path, help="record LLM replies to this JSONL store")
    run.add_argument("--replay", type=Path, help="answer LLM calls from this JSONL store, offline")
    run.add_argument("--log-dir", type=Path, default=Path("."))

    cmp_ = sub.add_parser("compare", help="compare optimizers on one dataset")
    cmp_.add_argument("--dataset", required=True)
    cmp_.add_argument("--label-column", default="target")
    cmp_.add_argument("--methods", type=_models, default=["random", "tpe", "multiagent"])
    cmp_.add_argument("--model", dest="models", action="append", type=_models)
    cmp_.add_argument("--budget", type=int, default=10)
    cmp_.add_argument("--k-folds", type=int, default=5)
    cmp_.add_argument("--seed", type=int, default=0)
    cmp_.add_argument("--out", type=Path, help="also write the Markdown table here")

    rep = sub.add_parser("report", help="summarize a run log")
    rep.add_argument("log", type=Path)
    rep.add_argument("--json", action="store_true", help="machine-readable output")

    sub.add_parser("datasets", help="list builtin datasets")
    return parser


def _load_dataset(source: str, label_column="target"):
    if source in BUILTIN_DATASETS:
        return builtin(source)
    if source.endswith(".csv") or os.path.sep in source:
        return load_csv(source, label_column)
    raise DataError(f"unknown dataset {source!r}; builtin datasets: {', '.join(BUILTIN_DATASETS)}")


def _families(values):
    if not values:
        return list(FAMILY_ORDER)
    flat = [m for group in values for m in (group if isinstance(group, list) else [group])]
    try:
        return [ModelFamily(m) for m in dict.fromkeys(flat)]
    except ValueError:
        raise UsageError(f"unknown model in {flat}; choose from {[f.value for f in FAMILY_ORDER]}") from None


def resolve_run_config(args) -> dict:
    """Defaults, then the JSON file, then explicit flags."""
    cfg = json.loads(json.dumps(RUN_DEFAULTS))
    if args.config is not None:
        try:
            file_cfg = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(file_cfg) - set(RUN_DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in RUN_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    transport = dict(cfg.get("transport") or {})
    for flag, key in (("endpoint", "endpoint_url"), ("model_name", "model_name"), ("api_key_env", "api_key_env_var")):
        if getattr(args, flag, None) is not None:
            transport[key] = getattr(args, flag)
    cfg["transport"] = transport
    if not cfg["dataset"]:
        raise UsageError("a dataset is required (--dataset or config file)")
    return cfg


def _build_agents(cfg, args, families):
    if cfg["agent_backend"] == "heuristic":
        return HeuristicRecommender(cfg["seed"], families), HeuristicDecider()
    tconf = TransportConfig(**cfg["transport"])
    if args.replay is not None:
        transport = RecordReplayTransport("replay", args.replay)
    else:
        transport = LiveTransport(tconf)
        if args.record is not None:
            transport = RecordReplayTransport("record", args.record, transport)
    return LLMRecommender(transport, families), LLMDecider(transport)


def cmd_run(args) -> int:
    try:
        cfg = resolve_run_config(args)
        families = _families(cfg["models"])
        goals = RunGoals(
            target_accuracy=cfg["target_accuracy"], max_iterations=cfg["max_iterations"],
            exploration_ratio_threshold=cfg["exploration_ratio_threshold"],
            min_trials=min(cfg["min_trials"], cfg["max_iterations"]), patience=cfg["patience"])
        dataset = _load_dataset(cfg["dataset"], cfg["label_column"])
        recommender, decider = _build_agents(cfg, args, families)
        smallest = int(min(c for c in np.bincount(dataset.labels) if c > 0))
        if not 2 <= cfg["k_folds"] <= smallest:
            raise UsageError(f"k_folds must lie in [2, {smallest}] for this dataset")
    except (UsageError, DataError, ConfigurationError, FileNotFoundError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        args.log_dir.mkdir(parents=True, exist_ok=True)
        sink = orchestrator.EventLog.open(args.log_dir, orchestrator.new_run_id())
        try:
            result = orchestrator.run(dataset, goals, recommender, decider, k=cfg["k_folds"], seed=cfg["seed"],
                                      log_sink=sink, families=families)
        finally:
            sink.close()
    except (orchestrator.LogWriteError, OSError) as exc:
        print(f"error: audit log failure: {exc}", file=sys.stderr)
        return EXIT_LOG

    best = result.best
    print(f"run {result.run_id}  log: {sink.path}")
    if best is None:
        print("best: none (every trial failed)")
    else:
        print(f"best: trial {best.trial_id} {best.config.dumps()}")
        print(f"accuracy: {best.report.mean_accuracy:.4f}")
    print(f"trials: {len(result.history)}  time: {result.total_wall_time_s:.2f}s  "
          f"trials/s: {result.trials_per_second:.2f}")
    print(f"termination: {result.termination.value}")
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        methods = [baselines.parse_method(m) for m in args.methods]
        if not methods:
            raise UsageError("at least one method is required")
        if args.budget < 1:
            raise UsageError("budget must be >= 1")
        families = _families(args.models)
        dataset = _load_dataset(args.dataset, args.label_column)
    except (UsageError, DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = baselines.compare(dataset, methods, args.budget, k=args.k_folds, seed=args.seed, families=families)
    table = report.to_markdown()
    print(table)
    if args.out is not None:
        args.out.write_text(table + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        goals, history, termination = orchestrator.replay(args.log)
    except (OSError, orchestrator.ReplayError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows = [{
        "trial_id": r.trial_id,
        "config": r.config.to_json(),
        "accuracy": r.report.mean_accuracy if r.report.succeeded else None,
        "status": r.report.status,
        "verdict": r.decision.verdict.value,
        "explore": r.explore_flag,
    } for r in history]
    best = history.best
    summary = {
        "trials": rows,
        "best_trial_id": history.incumbent,
        "best_accuracy": best.report.mean_accuracy if best else None,
        "termination": termination.value if termination else None,
        "complete": termination is not None,
        "goals": goals.to_json(),
    }
    if args.json:
        print(json.dumps(summary, indent=2))
        return EXIT_OK
    print("| trial | model | hyperparameters | accuracy | verdict | explore |")
    print("|---|---|---|---|---|---|")
    for row in rows:
        acc = "failed" if row["accuracy"] is None else f"{row['accuracy']:.4f}"
        print(f"| {row['trial_id']} | {row['config']['family']} | {json.dumps(row['config']['values'])} "
              f"| {acc} | {row['verdict']} | {row['explore']} |")
    if best is not None:
        print(f"best: trial {best.trial_id} accuracy {best.report.mean_accuracy:.4f}")
    print(f"termination: {termination.value}" if termination else "termination: incomplete (log truncated)")
    return EXIT_OK


def cmd_datasets(args) -> int:
    print(f"{'name':<14} {'n_samples':>9} {'n_features':>10} {'n_classes':>9}")
    for name in sorted(BUILTIN_DATASETS):
        ds = builtin(name)
        print(f"{name:<14} {ds.n_samples:>9} {ds.n_features:>10} {ds.n_classes:>9}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "report": cmd_report, "datasets": cmd_datasets}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
