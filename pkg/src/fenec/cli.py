"""Command-line interface: run, fit, eval, and inspect subcommands.

Diagnostics go to stderr; machine-readable results go to files or stdout.
Exit codes: 0 success, 2 invalid configuration, 3 data/file errors,
4 numerical conditioning failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .classifier import new_model
from .config import METHOD_FENEC_LOG, RunConfig
from .errors import ConditioningError, ConfigError, FenecError
from .feature_store import (
    build_task_stream,
    load_feature_file,
    load_split,
    read_fenc_header,
)
from .logit_head import FeNeCLog, TrainConfig
from .model_io import load_model, read_model_header, write_model
from .protocol import aggregate_runs, run_protocol

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _train_config(cfg: RunConfig, seed: int) -> TrainConfig | None:
    if cfg.hyper.method != METHOD_FENEC_LOG:
        return None
    section = cfg.training
    return TrainConfig(
        learning_rate=cfg.hyper.learning_rate,
        batch_size=section.batch_size,
        max_epochs=section.max_epochs,
        patience=section.patience,
        validation_fraction=section.validation_fraction,
        seed=seed,
    )


def _resolve_out_dir(cfg: RunConfig, out_flag) -> str:
    out_dir = out_flag or cfg.output_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def cmd_run(args) -> int:
    cfg = RunConfig.from_file(args.config)
    if args.seed:
        cfg = cfg.with_seeds(args.seed)

    if args.dry_run:
        n_samples, n_features = read_fenc_header(cfg.train_features)
        read_fenc_header(cfg.test_features)
        n_classes = 0
        for split_path in cfg.splits:
            n_classes = max(n_classes, sum(len(g) for g in load_split(split_path)))
        k = cfg.hyper.n_clusters
        print(
            _canonical(
                {
                    "parameter_count": n_classes * n_features * (k + n_features),
                    "n_classes": n_classes,
                    "n_features": n_features,
                    "n_train_samples": n_samples,
                    "config": cfg.to_dict(),
                }
            )
        )
        return EXIT_OK

    out_dir = _resolve_out_dir(cfg, args.out)
    train = load_feature_file(cfg.train_features)
    test = load_feature_file(cfg.test_features)

    reports = []
    report_files = []
    for seed, split_path in cfg.runs():
        split = load_split(split_path)
        stream = build_task_stream(train, test, split)
        report = run_protocol(stream, cfg.hyper, _train_config(cfg, seed), seed=seed)
        name = f"report_{seed}.json"
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(report.to_json_bytes())
        reports.append(report)
        report_files.append(name)
        _log(f"seed {seed}: last-task accuracy {report.last_task_accuracy:.4f}")

    summary = aggregate_runs(reports)
    payload = {
        "config": cfg.to_dict(),
        "metrics": summary.to_dict(),
        "reports": report_files,
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        fh.write(_canonical(payload) + "\n")
    with open(os.path.join(out_dir, "curves.csv"), "w", encoding="utf-8") as fh:
        fh.write(summary.curves_csv())
    _log(f"wrote summary.json and curves.csv to {out_dir}")
    return EXIT_OK


def _parse_task_range(spec: str, n_tasks: int) -> list:
    try:
        if "-" in spec:
            lo, hi = spec.split("-", 1)
            tasks = list(range(int(lo), int(hi) + 1))
        else:
            tasks = [int(spec)]
    except ValueError:
        raise ConfigError(f"invalid task range {spec!r}; use N or A-B") from None
    if not tasks or tasks[0] < 0 or tasks[-1] >= n_tasks:
        raise ConfigError(f"task range {spec!r} out of bounds for {n_tasks} tasks")
    return tasks


def cmd_fit(args) -> int:
    cfg = RunConfig.from_file(args.config)
    seed = args.seed[0] if args.seed else cfg.seeds[0]
    split_path = args.split or cfg.splits[0]
    split = load_split(split_path)
    train = load_feature_file(cfg.train_features)
    test = load_feature_file(cfg.test_features)
    stream = build_task_stream(train, test, split)

    if os.path.exists(args.model):
        model = load_model(args.model)
        if model.hyper != cfg.hyper or model.seed != seed:
            raise ConfigError(
                "existing model was fitted with different hyperparameters or seed"
            )
    else:
        model = new_model(cfg.hyper, seed=seed)

    spec = args.tasks or f"{model.tasks_fitted}-{stream.n_tasks - 1}"
    tasks = _parse_task_range(spec, stream.n_tasks)
    for t in tasks:
        if t != model.tasks_fitted:
            raise ConfigError(
                f"task {t} cannot be fitted next; model has {model.tasks_fitted} tasks"
            )
        model.fit_task(stream.tasks[t].train)
        if cfg.hyper.method == METHOD_FENEC_LOG and t == 0:
            model.train_head(stream.tasks[0].train, _train_config(cfg, seed))
        _log(f"fitted task {t} ({len(stream.tasks[t].classes)} classes)")
    write_model(model, args.model)
    _log(f"model written to {args.model}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    if isinstance(model, FeNeCLog) and model.head is None:
        raise ConfigError("model has no trained logit head; fit task 0 first")
    batch = load_feature_file(args.features)
    preds = model.predict(batch.features)
    correct = int((preds == batch.labels).sum())
    print(
        _canonical(
            {
                "accuracy": correct / batch.n_samples,
                "n_correct": correct,
                "n_samples": batch.n_samples,
            }
        )
    )
    return EXIT_OK


def cmd_inspect(args) -> int:
    header = read_model_header(args.model)
    print(json.dumps(header, sort_keys=True, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fenec",
        description="Exemplar-free class-incremental classification over feature files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full incremental protocol")
    p_run.add_argument("--config", required=True, help="path to a JSON run configuration")
    p_run.add_argument(
        "--seed", type=int, action="append", default=None, help="override config seeds (repeatable)"
    )
    p_run.add_argument("--out", default=None, help="output directory for reports")
    p_run.add_argument(
        "--dry-run",
        action="store_true",
        help="validate the config and print the resolved parameter count",
    )
    p_run.set_defaults(func=cmd_run)

    p_fit = sub.add_parser("fit", help="fit one or more tasks and persist the model")
    p_fit.add_argument("--config", required=True)
    p_fit.add_argument("--model", required=True, help="model file to create or extend")
    p_fit.add_argument("--tasks", default=None, help="task index or range A-B (default: all remaining)")
    p_fit.add_argument("--seed", type=int, action="append", default=None)
    p_fit.add_argument("--split", default=None, help="override the config's first split file")
    p_fit.set_defaults(func=cmd_fit)

    p_eval = sub.add_parser("eval", help="score a feature file with a persisted model")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--features", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_ins = sub.add_parser("inspect", help="print a persisted model's header")
    p_ins.add_argument("--model", required=True)
    p_ins.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except ConditioningError as exc:
        _log(f"numerical error: {exc}")
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        _log(f"missing file: {exc.filename or exc}")
        return EXIT_DATA
    except FenecError as exc:
        _log(f"data error: {exc}")
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main())
