"""Command-line entry point.

Exit codes: 0 success, 2 configuration or usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .classifiers import FAMILIES, ModelError
from .dataset_io import DataError, SynthConfig, category_counts, clean, load_csv, synthesize
from .harness import (
    ConfigError,
    ExperimentConfig,
    ModelEntry,
    StageError,
    format_table,
    run_experiment,
)
from .preprocess import apply_scaler, constant_columns, correlation_rank, fit_scaler
from .tuning_eval import DEFAULT_GRIDS
from .zeroday_split import INJECT_MODES, make_split, select_zero_day_categories


def _add_data_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data source (a CSV, or synthetic data by default)")
    g.add_argument("--csv", help="UNSW-NB15-style CSV file")
    g.add_argument("--no-header", action="store_true", help="CSV has no header row")
    g.add_argument("--rows", type=int, default=50_000, help="synthetic rows")
    g.add_argument("--features", type=int, default=12, help="synthetic features")
    g.add_argument("--attack-fraction", type=float, default=None, help="synthetic attack share")
    g.add_argument("--separation", type=float, default=3.0, help="synthetic class separation")
    g.add_argument("--noise", type=float, default=1.0, help="synthetic noise std")
    g.add_argument("--synth-seed", type=int, default=0, help="synthetic data seed")


def _synth_config(args) -> SynthConfig:
    kw = dict(n_rows=args.rows, n_features=args.features, class_separation=args.separation,
              noise_std=args.noise, seed=args.synth_seed)
    if args.attack_fraction is not None:
        kw["attack_fraction"] = args.attack_fraction
    try:
        return SynthConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load(args):
    if args.csv:
        return clean(load_csv(args.csv, has_header=not args.no_header))[0]
    return clean(synthesize(_synth_config(args)))[0]


def _zero_day(args, d):
    if args.zero_day:
        return {c.strip() for c in args.zero_day.split(",") if c.strip()}
    return select_zero_day_categories(category_counts(d), args.zero_day_n)


def _json_arg(text, what):
    try:
        val = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} is not valid JSON: {exc}") from exc
    if not isinstance(val, dict):
        raise ConfigError(f"{what} must be a JSON object")
    return val


# ------------------------------------------------------------ commands


def cmd_synth(args) -> int:
    cfg = _synth_config(args)
    d = synthesize(cfg)
    d.to_csv(args.out)
    n_att = int(d.label.sum())
    print(f"wrote {d.n_rows} rows ({n_att} attacks, {100 * n_att / d.n_rows:.2f}%) to {args.out}")
    return 0


def cmd_inspect(args) -> int:
    d = _load(args)
    counts = category_counts(d)
    const = constant_columns(d.features)
    keep = np.setdiff1d(np.arange(d.n_features), const)
    names = [d.feature_names[j] for j in keep]
    X = apply_scaler(fit_scaler(d.features[:, keep]), d.features[:, keep])
    ranking = correlation_rank(X, d.label, names)
    if args.json:
        doc = {
            "n_rows": d.n_rows,
            "categories": [{"category": c.category, "count": c.count, "percentage": c.percentage}
                           for c in counts],
            "constant_features": [d.feature_names[j] for j in const],
            "correlation_with_label": [{"feature": f, "r": r} for f, r in ranking.entries],
        }
        print(json.dumps(doc, indent=2))
        return 0
    print(f"{d.n_rows} rows, {d.n_features} features, {len(counts)} categories")
    for c in counts:
        print(f"  {c.category:<16} {c.count:>10}  {c.percentage:8.4f}%")
    print("correlation with label (|r| descending):")
    for f, r in ranking.entries[: args.top]:
        print(f"  {f:<20} {r:+.4f}")
    return 0


def cmd_split(args) -> int:
    d = _load(args)
    plan = make_split(d, args.train_fraction, _zero_day(args, d), args.seed, args.inject_mode)
    text = plan.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"train {plan.train_indices.size}, test {plan.test_indices.size}, zero-day "
              f"{sorted(plan.zero_day_categories)} -> {args.out}")
    else:
        print(text)
    return 0


def cmd_train(args) -> int:
    if args.csv:
        cfg = ExperimentConfig(csv_path=args.csv, has_header=not args.no_header)
    else:
        cfg = ExperimentConfig(synth=_synth_config(args))
    params = _json_arg(args.params, "--params") if args.params else {}
    grid = None
    if args.grid == "default":
        grid = DEFAULT_GRIDS[args.model]
    elif args.grid:
        grid = _json_arg(args.grid, "--grid")
    cfg.models = [ModelEntry(args.model, params, grid)]
    cfg.smote = args.smote
    cfg.paired = False
    cfg.seed = args.seed
    cfg.inject_mode = args.inject_mode
    cfg.out_dir = args.out
    if args.zero_day:
        cfg.zero_day_auto_n = None
        cfg.zero_day_categories = sorted(_zero_day(args, None))
    else:
        cfg.zero_day_auto_n = args.zero_day_n
    rep = run_experiment(cfg.validate())
    print(format_table(rep))
    return 0


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.out is not None:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.inject_mode is not None:
        cfg.inject_mode = args.inject_mode
    if args.paper_faithful_scaling:
        cfg.paper_faithful_scaling = True
    if args.no_smote:
        cfg.smote = False
    if args.no_paired:
        cfg.paired = False
    if args.subsample is not None:
        cfg.subsample_fraction = args.subsample
    if args.models:
        fams = [m.strip() for m in args.models.split(",") if m.strip()]
        bad = [f for f in fams if f not in FAMILIES]
        if bad:
            raise ConfigError(f"unknown model families {bad}; expected from {FAMILIES}")
        cfg.models = [ModelEntry(f) for f in fams]
    if args.dump_config:
        print(cfg.validate().to_json())
        return 0
    rep = run_experiment(cfg.validate())
    print(format_table(rep))
    print(f"zero-day categories {rep.zero_day_categories}, "
          f"{100 * rep.test_zero_day_share:.2f}% of test rows")
    if cfg.out_dir:
        print(f"reports written to {cfg.out_dir}")
    return 0


def cmd_oracle(args) -> int:
    from .oracles import run_all

    results = run_all(args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


# ------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="zeroday-ids",
        description="Zero-day intrusion detection experiments on NetFlow-style records.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    _add_data_args(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inspect", help="category counts and label correlations")
    _add_data_args(p)
    p.add_argument("--top", type=int, default=20, help="correlations to list")
    p.add_argument("--json", action="store_true", help="print JSON instead of text")
    p.set_defaults(func=cmd_inspect)

    def split_args(p):
        p.add_argument("--train-fraction", type=float, default=0.7)
        p.add_argument("--zero-day-n", type=int, default=4, help="hold out the N rarest attack types")
        p.add_argument("--zero-day", help="comma-separated zero-day categories (overrides -n)")
        p.add_argument("--inject-mode", choices=INJECT_MODES, default="shuffled")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("split", help="emit a zero-day split plan as JSON")
    _add_data_args(p)
    split_args(p)
    p.add_argument("--out", help="plan JSON path (default: stdout)")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="run the pipeline for one model")
    _add_data_args(p)
    split_args(p)
    p.add_argument("--model", choices=FAMILIES, required=True)
    p.add_argument("--params", help="hyperparameters as a JSON object")
    p.add_argument("--grid", help="grid as a JSON object of lists, or 'default'")
    p.add_argument("--smote", action="store_true", help="oversample the training set")
    p.add_argument("--out", help="report directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("experiment", help="run the full paired pipeline")
    p.add_argument("--config", help="experiment JSON config (default: synthetic desk-scale run)")
    p.add_argument("--out", help="report directory (overrides config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--inject-mode", choices=INJECT_MODES)
    p.add_argument("--paper-faithful-scaling", action="store_true",
                   help="fit scaler, pruning and PCA on all rows (leaks test statistics)")
    p.add_argument("--no-smote", action="store_true")
    p.add_argument("--no-paired", action="store_true", help="run only the configured SMOTE mode")
    p.add_argument("--subsample", type=float, help="row fraction to keep")
    p.add_argument("--models", help="comma-separated families, fitted with default settings")
    p.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("oracle", help="run the independent verification oracles")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ModelError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
