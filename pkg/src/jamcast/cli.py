"""Command-line pipeline: generate, ingest, train, bench.

Exit codes are a stable scripting contract: 0 success, 1 validation or
configuration error, 2 I/O error. Every command writes a run manifest next
to its outputs; all randomness flows from the single --seed flag. Worker
count comes from --workers, else the JAMCAST_WORKERS environment variable,
else 1.
"""

from __future__ import annotations

import argparse
import glob as globmod
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from jamcast import __version__
from jamcast.datagen import GenConfig, generate_alerts, generate_jams
from jamcast.errors import ConfigError, JamcastError
from jamcast.evaluation import (
    bench,
    render_table,
    reports_to_csv,
    reports_to_json,
)
from jamcast.ingest import ingest_files, load_matrix, save_matrix, schema_for
from jamcast.manifest import build_manifest, make_run_id
from jamcast.trees.training import TrainConfig, save_model, train_gbt, train_rf, train_xgb

_TRAINERS = {"rf": train_rf, "gbt": train_gbt, "xgb": train_xgb}


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit code 1 per the CLI contract."""

    def error(self, message):  # noqa: D102
        raise ConfigError(message)


def _parse_when(text: str) -> int:
    """ISO date/datetime (naive treated as UTC) or raw epoch-ms integer."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ConfigError(f"bad timestamp {text!r}: {exc}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 1000)


def _resolve_workers(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("JAMCAST_WORKERS")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"JAMCAST_WORKERS must be an integer, got {env!r}") from exc
    return 1


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trees", type=int, default=None, help="number of trees")
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--max-leaves", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="leaf L2 term")
    p.add_argument("--gamma", type=float, default=None, help="minimum split gain")
    p.add_argument("--min-child-weight", type=float, default=None)
    p.add_argument("--max-bins", type=int, default=None)
    p.add_argument("--subsample-rows", type=float, default=None, help="rf bagging fraction")
    p.add_argument("--subsample-features", type=float, default=None)
    p.add_argument("--no-bootstrap", action="store_true", help="rf: sample without replacement")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None, help="data-parallel workers")


def _train_config(args, n_trees_default: int) -> TrainConfig:
    base = TrainConfig()
    return TrainConfig(
        n_trees=args.trees if args.trees is not None else n_trees_default,
        max_depth=args.max_depth if args.max_depth is not None else base.max_depth,
        max_leaves=args.max_leaves if args.max_leaves is not None else base.max_leaves,
        learning_rate=(
            args.learning_rate if args.learning_rate is not None else base.learning_rate
        ),
        lam=args.lam if args.lam is not None else base.lam,
        gamma=args.gamma if args.gamma is not None else base.gamma,
        min_child_weight=(
            args.min_child_weight if args.min_child_weight is not None else base.min_child_weight
        ),
        max_bins=args.max_bins if args.max_bins is not None else base.max_bins,
        subsample_rows=(
            args.subsample_rows if args.subsample_rows is not None else base.subsample_rows
        ),
        subsample_features=(
            args.subsample_features
            if args.subsample_features is not None
            else base.subsample_features
        ),
        bootstrap=not args.no_bootstrap,
        seed=args.seed,
        n_workers=_resolve_workers(args.workers),
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="jamcast", description=__doc__)
    parser.add_argument("--version", action="version", version=f"jamcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic alert/jam JSONL corpora")
    g.add_argument("--config", type=Path, default=None, help="GenConfig JSON file")
    g.add_argument("--jams", type=int, default=None)
    g.add_argument("--alerts", type=int, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--start", type=str, default=None, help="window start (ISO or epoch-ms)")
    g.add_argument("--end", type=str, default=None, help="window end (ISO or epoch-ms)")
    g.add_argument("--coupling-noise", type=float, default=None)
    g.add_argument(
        "--level-weights", type=str, default=None, help="five comma-separated weights"
    )
    g.add_argument("--out", type=Path, required=True, help="output directory")

    i = sub.add_parser("ingest", help="parse/clean/encode jam JSONL into a matrix file")
    i.add_argument("--input", required=True, help="glob of *.jsonl files")
    i.add_argument("--feature-set", choices=("leaky", "honest"), default="leaky")
    i.add_argument("--window-start", type=str, default=None)
    i.add_argument("--window-end", type=str, default=None)
    i.add_argument("--out", type=Path, required=True, help="matrix output path (.tjm)")

    t = sub.add_parser("train", help="train one model from a matrix file")
    t.add_argument("--matrix", type=Path, required=True)
    t.add_argument("--model", choices=("rf", "gbt", "xgb"), required=True)
    t.add_argument("--out", type=Path, required=True, help="model JSON output path")
    _add_train_flags(t)

    b = sub.add_parser("bench", help="compare models on one matrix, table-style report")
    b.add_argument("--matrix", type=Path, required=True)
    b.add_argument("--models", type=str, default="rf,gbt,xgb", help="comma-separated kinds")
    b.add_argument("--train-fraction", type=float, default=0.75)
    b.add_argument("--threshold", type=float, default=0.5)
    b.add_argument("--out-dir", type=Path, required=True)
    _add_train_flags(b)
    return parser


def _cmd_generate(args, argv: list[str]) -> int:
    fields: dict = {}
    if args.config is not None:
        fields.update(json.loads(Path(args.config).read_text()))
    if args.jams is not None:
        fields["n_jams"] = args.jams
    if args.alerts is not None:
        fields["n_alerts"] = args.alerts
    if args.seed is not None:
        fields["seed"] = args.seed
    if args.coupling_noise is not None:
        fields["coupling_noise"] = args.coupling_noise
    if args.start is not None or args.end is not None:
        window = list(fields.get("date_window", GenConfig().date_window))
        if args.start is not None:
            window[0] = _parse_when(args.start)
        if args.end is not None:
            window[1] = _parse_when(args.end)
        fields["date_window"] = tuple(window)
    if args.level_weights is not None:
        parts = [float(x) for x in args.level_weights.split(",")]
        if len(parts) != 5:
            raise ConfigError("--level-weights needs exactly five values")
        fields["level_weights"] = tuple(parts)
    if "date_window" in fields:
        fields["date_window"] = tuple(fields["date_window"])
    if "level_weights" in fields:
        fields["level_weights"] = tuple(fields["level_weights"])
    config = GenConfig(**fields)
    config.validate()

    out_dir = args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    jams_path = out_dir / "jams.jsonl"
    alerts_path = out_dir / "alerts.jsonl"
    with open(jams_path, "wb") as fh:
        n_jams = generate_jams(config, fh)
    with open(alerts_path, "wb") as fh:
        n_alerts = generate_alerts(config, fh)

    config_doc = {
        "n_jams": config.n_jams,
        "n_alerts": config.n_alerts,
        "seed": config.seed,
        "date_window": list(config.date_window),
        "level_weights": list(config.level_weights),
        "coupling_noise": config.coupling_noise,
    }
    manifest = build_manifest(
        command="generate",
        command_line=argv,
        config=config_doc,
        inputs=[],
        artifacts=[jams_path, alerts_path],
        seed=config.seed,
        n_workers=None,
    )
    manifest.write(out_dir / "generate.manifest.json")
    print(f"wrote {n_jams} jams and {n_alerts} alerts to {out_dir}")
    return 0


def _cmd_ingest(args, argv: list[str]) -> int:
    paths = sorted(globmod.glob(args.input))
    if not paths:
        raise FileNotFoundError(f"no input files matched {args.input!r}")
    window = None
    if args.window_start is not None or args.window_end is not None:
        if args.window_start is None or args.window_end is None:
            raise ConfigError("--window-start and --window-end must be given together")
        window = (_parse_when(args.window_start), _parse_when(args.window_end))
    schema = schema_for(args.feature_set)
    matrix, encoding, summary = ingest_files(paths, schema, window=window)

    config_doc = {
        "feature_set": args.feature_set,
        "window": list(window) if window else None,
        "schema_fingerprint": matrix.schema_fingerprint,
    }
    run_id = make_run_id("ingest", config_doc, {p: "" for p in paths})
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_matrix(args.out, matrix, encoding, run_id=run_id)
    report_path = Path(str(args.out) + ".report.json")
    report_path.write_text(json.dumps(summary.as_dict(), indent=1, sort_keys=True) + "\n")
    manifest = build_manifest(
        command="ingest",
        command_line=argv,
        config=config_doc,
        inputs=paths,
        artifacts=[args.out, report_path],
        seed=None,
        n_workers=None,
    )
    manifest.write(Path(str(args.out) + ".manifest.json"))
    print(
        f"ingested {matrix.n_rows} rows "
        f"({summary.parse.rows_rejected} parse-rejected, "
        f"{summary.clean.rows_rejected} clean-dropped) -> {args.out}"
    )
    return 0


def _cmd_train(args, argv: list[str]) -> int:
    config = _train_config(args, n_trees_default=TrainConfig().n_trees)
    config.validate()
    matrix, _ = load_matrix(args.matrix)
    trainer = _TRAINERS[args.model]
    model = trainer(matrix, config=config)

    config_doc = {k: v for k, v in config.__dict__.items() if k != "n_workers"}
    config_doc["model"] = args.model
    run_id = make_run_id("train", config_doc, {str(args.matrix): ""})
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_model(args.out, model, run_id=run_id)
    manifest = build_manifest(
        command="train",
        command_line=argv,
        config=config_doc,
        inputs=[args.matrix],
        artifacts=[args.out],
        seed=config.seed,
        n_workers=config.n_workers,
    )
    manifest.write(Path(str(args.out) + ".manifest.json"))
    print(f"trained {args.model} ({len(model.trees)} trees) -> {args.out}")
    return 0


def _cmd_bench(args, argv: list[str]) -> int:
    kinds = [k.strip() for k in args.models.split(",") if k.strip()]
    for kind in kinds:
        if kind not in _TRAINERS:
            raise ConfigError(f"unknown model kind {kind!r}")
    config = _train_config(args, n_trees_default=TrainConfig().n_trees)
    config.validate()
    matrix, _ = load_matrix(args.matrix)
    reports = bench(
        matrix,
        [(k, config) for k in kinds],
        train_fraction=args.train_fraction,
        seed=args.seed,
        threshold=args.threshold,
    )
    config_doc = {k: v for k, v in config.__dict__.items() if k != "n_workers"}
    config_doc.update(
        {"models": kinds, "train_fraction": args.train_fraction, "threshold": args.threshold}
    )
    run_id = make_run_id("bench", config_doc, {str(args.matrix): ""})
    args.out_dir.mkdir(parents=True, exist_ok=True)
    table = render_table(reports)
    (args.out_dir / "bench_table.txt").write_text(table)
    (args.out_dir / "bench_table.csv").write_text(reports_to_csv(reports))
    (args.out_dir / "bench_reports.json").write_text(reports_to_json(reports, run_id=run_id))
    manifest = build_manifest(
        command="bench",
        command_line=argv,
        config=config_doc,
        inputs=[args.matrix],
        artifacts=[
            args.out_dir / "bench_table.txt",
            args.out_dir / "bench_table.csv",
            args.out_dir / "bench_reports.json",
        ],
        seed=args.seed,
        n_workers=config.n_workers,
    )
    manifest.write(args.out_dir / "bench.manifest.json")
    print(table, end="")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args, argv)
    except JamcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
