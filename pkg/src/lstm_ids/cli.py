"""``lstm-ids`` command line: generate, preprocess, train, evaluate, predict, report.

Payloads (reports, predictions) go to stdout or to files; diagnostics and
logs go to stderr. Every file is written to a temp sibling and renamed on
success. Exit codes: 0 success, 1 usage or config error, 2 data error,
3 training error, 4 file-format or I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import pandas as pd
from dotenv import load_dotenv

from lstm_ids.config import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_PATIENCE,
    DEFAULT_SEED,
    DEFAULT_TIMESTEPS,
    DEFAULT_TRAIN_FRACTION,
    PRESETS,
    VARIANTS,
    ModelConfig,
    config_from_preset,
    get_preset,
    load_run_config,
    worker_threads,
)
from lstm_ids.data.dataset_io import dataset_bytes, load_dataset
from lstm_ids.data.ingest import ingest_many
from lstm_ids.data.preprocess import numerize, preprocess, window
from lstm_ids.data.schemas import SCHEMA_NAMES, DatasetSchema, get_schema
from lstm_ids.data.synth import DEFAULT_MEAN_BURST, equal_counts, generate, load_profiles, parse_counts
from lstm_ids.exceptions import (
    ConfigError,
    DataError,
    ModelFormatError,
    ShapeError,
    TrainingError,
)
from lstm_ids.fileio import atomic_write, write_bytes, write_text
from lstm_ids.metrics import render_history, render_report
from lstm_ids.metrics.classification import ClassificationReport
from lstm_ids.metrics.render import FORMATS
from lstm_ids.observability import new_context, setup_logging
from lstm_ids.training import evaluate, load_model, predict, save_model, train
from lstm_ids.version import __version__

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRAINING = 3
EXIT_IO = 4

TRAIN_FILE = "train.lbds"
VALIDATION_FILE = "validation.lbds"
SUMMARY_FILE = "summary.json"


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1, matching config errors."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# ── Shared option groups ─────────────────────────────────────────────

def _add_schema_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--schema", required=True, choices=SCHEMA_NAMES,
                        help="Flow schema of the CSV.")
    parser.add_argument("--features", type=_csv_list, default=None,
                        help="Custom schema: comma-separated feature columns.")
    parser.add_argument("--label-column", default=None,
                        help="Custom schema: name of the label column.")
    parser.add_argument("--classes", type=_csv_list, default=None,
                        help="Custom schema: comma-separated class names (defines label order).")
    parser.add_argument("--ip-columns", type=_csv_list, default=(),
                        help="Custom schema: feature columns holding IPv4 addresses.")


def _schema_from_args(args: argparse.Namespace) -> DatasetSchema:
    if args.schema != "custom":
        return get_schema(args.schema)
    problems = [f"--schema custom requires {flag}"
                for flag, value in (("--features", args.features),
                                    ("--label-column", args.label_column),
                                    ("--classes", args.classes)) if not value]
    if problems:
        raise ConfigError(problems)
    return DatasetSchema.custom(args.features, args.label_column, args.classes,
                                args.ip_columns)


# ── generate ─────────────────────────────────────────────────────────

def cmd_generate(args: argparse.Namespace) -> int:
    schema = _schema_from_args(args)
    counts = parse_counts(args.counts) if args.counts else equal_counts(schema, args.per_class)
    profiles = load_profiles(args.profile, schema)
    rows = generate(schema, profiles, counts, args.seed, args.out, args.mean_burst)
    print(f"Wrote {rows} {schema.name} rows to {args.out}", file=sys.stderr)
    return EXIT_OK


# ── preprocess ───────────────────────────────────────────────────────

def cmd_preprocess(args: argparse.Namespace) -> int:
    problems = []
    if args.timesteps < 1:
        problems.append(f"--timesteps must be >= 1, got {args.timesteps}")
    if not 0 < args.train_fraction < 1:
        problems.append(f"--train-fraction must lie in (0, 1), got {args.train_fraction}")
    if problems:
        raise ConfigError(problems)
    schema = _schema_from_args(args)
    records = ingest_many(args.inputs, schema, workers=min(len(args.inputs), worker_threads()))
    result = preprocess(records, schema, args.timesteps, args.train_fraction, args.seed)
    out_dir = Path(args.out_dir)
    summary = dict(result.summary.to_dict(), schema=schema.name,
                   inputs=[str(p) for p in args.inputs])
    payloads = {
        out_dir / TRAIN_FILE: dataset_bytes(result.train),
        out_dir / VALIDATION_FILE: dataset_bytes(result.validation),
        out_dir / SUMMARY_FILE: (json.dumps(summary, indent=2, sort_keys=True)
                                 + "\n").encode("utf-8"),
    }
    for path, data in payloads.items():
        write_bytes(path, data)
        logger.info("Wrote %s (%d bytes)", path, len(data))
    s = result.summary
    print(f"{s.rows_kept} of {s.rows_read} rows kept ({s.dropped_null} null, "
          f"{s.dropped_duplicate} duplicate); {s.train_windows} train and "
          f"{s.validation_windows} validation windows in {out_dir}", file=sys.stderr)
    return EXIT_OK


# ── train ────────────────────────────────────────────────────────────

def resolve_model_config(args: argparse.Namespace, timesteps: int) -> ModelConfig:
    """Preset, then ``--config`` TOML, then explicit flags."""
    config = config_from_preset(get_preset(args.preset)) if args.preset else ModelConfig()
    from_file = load_run_config(args.config) if args.config else {}
    config = config.with_overrides(**from_file)
    config = config.with_overrides(
        variant=args.variant,
        layer_cells=args.layers,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        seed=args.seed,
        clip_global_norm=args.clip_global_norm,
        early_stop_patience=args.patience,
    )
    if args.no_early_stop:
        config = replace(config, early_stop_patience=None)
    if "timesteps" not in from_file:
        config = replace(config, timesteps=timesteps)
    return config.ensure_valid()


def describe_config(config: ModelConfig) -> str:
    return ", ".join(f"{k}={v}" for k, v in config.to_dict().items())


def cmd_train(args: argparse.Namespace) -> int:
    train_set = load_dataset(args.train)
    validation = load_dataset(args.validation) if args.validation else None
    config = resolve_model_config(args, train_set.timesteps)
    if args.preset and PRESETS[args.preset].dataset != train_set.schema.name:
        logger.warning("Preset %s targets %s but the windows are %s",
                       args.preset, PRESETS[args.preset].dataset, train_set.schema.name)
    print(f"train config: {describe_config(config)}", file=sys.stderr)
    logger.info("Defaults for unstated settings: batch_size=%d timesteps=%d "
                "early_stop_patience=%d train_fraction=%s",
                DEFAULT_BATCH_SIZE, DEFAULT_TIMESTEPS, DEFAULT_PATIENCE,
                DEFAULT_TRAIN_FRACTION)
    model = train(train_set, config, validation)
    save_model(model, args.out)
    history_path = Path(args.history) if args.history else Path(args.out).with_suffix(".history.csv")
    write_text(history_path, render_history(model.history))
    last = model.history[-1]
    print(f"Trained {len(model.history)} epoch(s); best epoch {model.best_epoch}; "
          f"final val acc {last.val_accuracy:.4f}. Model {args.out}, history {history_path}",
          file=sys.stderr)
    return EXIT_OK


# ── evaluate / predict / report ──────────────────────────────────────

def _emit(text: str, out: Optional[str]) -> None:
    if out:
        write_text(out, text)
    else:
        sys.stdout.write(text)


def cmd_evaluate(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    dataset = load_dataset(args.data)
    result = evaluate(model, dataset)
    _emit(render_report(result.report, args.format), args.out)
    if args.csv_out:
        write_text(args.csv_out, render_report(result.report, "csv"))
    if args.json_out:
        write_text(args.json_out, render_report(result.report, "json"))
    print(f"Validation pass: {result.seconds:.3f} s, {result.ms_per_sample:.4f} ms/sample "
          f"over {dataset.num_samples} windows", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    if args.data:
        windows = load_dataset(args.data)
    else:
        numerized = numerize(ingest_many(args.csv, model.schema), model.schema)
        windows = window(numerized.matrix, numerized.labels, model.config.timesteps,
                         model.schema)
    prediction = predict(model, windows)
    frame = pd.DataFrame(prediction.probabilities,
                         columns=[f"p_{name}" for name in model.class_names])
    frame.insert(0, "predicted", [model.class_names[k] for k in prediction.labels])
    frame.insert(0, "actual", [model.class_names[k] for k in windows.labels])
    frame.insert(0, "window", range(len(frame)))
    with atomic_write(args.out) as f:
        frame.to_csv(f, index=False, lineterminator="\n")
    print(f"Wrote {len(frame)} predictions to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.input)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"Report not found: {path}") from None
    except json.JSONDecodeError as e:
        raise DataError(f"Report {path} is not JSON: {e}") from e
    _emit(render_report(ClassificationReport.from_dict(data), args.format), args.out)
    return EXIT_OK


# ── Parser ───────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="lstm-ids",
        description="Flow-based intrusion detection with numpy LSTM classifiers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for progress, -vv for debug logging (stderr).")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    gen = commands.add_parser("generate", help="Write a synthetic labeled flow CSV.")
    _add_schema_options(gen)
    amounts = gen.add_mutually_exclusive_group(required=True)
    amounts.add_argument("--counts", help="Rows per class, e.g. Normal=1000,DDoS=1000.")
    amounts.add_argument("--per-class", type=int, help="Rows for every schema class.")
    gen.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Random seed (default: %(default)s).")
    gen.add_argument("--profile", default=None,
                     help="Traffic profile TOML (default: $LBDMIDS_PROFILE, else bundled).")
    gen.add_argument("--mean-burst", type=float, default=DEFAULT_MEAN_BURST,
                     help="Mean length of a single-class burst (default: %(default)s).")
    gen.add_argument("--out", required=True, help="Output CSV path.")
    gen.set_defaults(handler=cmd_generate)

    pre = commands.add_parser("preprocess", help="Ingest, clean, normalize, split and window flow CSVs.")
    pre.add_argument("inputs", nargs="+", help="Labeled flow CSV file(s).")
    _add_schema_options(pre)
    pre.add_argument("--timesteps", type=int, default=DEFAULT_TIMESTEPS,
                     help="Window length, past flows per sample (default: %(default)s).")
    pre.add_argument("--train-fraction", type=float, default=DEFAULT_TRAIN_FRACTION,
                     help="Per-class share of rows for training (default: %(default)s).")
    pre.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Split seed (default: %(default)s).")
    pre.add_argument("--out-dir", required=True,
                     help=f"Directory for {TRAIN_FILE}, {VALIDATION_FILE} and {SUMMARY_FILE}.")
    pre.set_defaults(handler=cmd_preprocess)

    tr = commands.add_parser("train", help="Train a stacked or bidirectional LSTM.")
    tr.add_argument("--train", required=True, help="Training dataset file.")
    tr.add_argument("--validation", default=None,
                    help="Validation dataset file (default: hold out 25%% of --train).")
    tr.add_argument("--preset", choices=sorted(PRESETS), default=None,
                    help="Published hyperparameters to start from.")
    tr.add_argument("--config", default=None, help="TOML run config with a [model] table.")
    tr.add_argument("--variant", choices=VARIANTS, default=None,
                    help="Model variant (default: preset's, else stacked).")
    tr.add_argument("--layers", type=_int_list, default=None,
                    help="Cells per layer, e.g. 32,32 (default: preset's, else 32).")
    tr.add_argument("--epochs", type=int, default=None,
                    help="Maximum epochs (default: preset's, else 5).")
    tr.add_argument("--learning-rate", type=float, default=None,
                    help="Adam learning rate (default: preset's, else 0.002).")
    tr.add_argument("--batch-size", type=int, default=None,
                    help=f"Windows per minibatch (default: {DEFAULT_BATCH_SIZE}).")
    tr.add_argument("--seed", type=int, default=None,
                    help=f"Seed for init and shuffling (default: {DEFAULT_SEED}).")
    tr.add_argument("--clip-global-norm", type=float, default=None,
                    help="Clip gradients to this global norm (default: off).")
    tr.add_argument("--patience", type=int, default=None,
                    help=f"Early-stopping patience in epochs (default: {DEFAULT_PATIENCE}).")
    tr.add_argument("--no-early-stop", action="store_true",
                    help="Always run every epoch.")
    tr.add_argument("--out", required=True, help="Model file to write.")
    tr.add_argument("--history", default=None,
                    help="Epoch-history CSV (default: model path with .history.csv).")
    tr.set_defaults(handler=cmd_train)

    ev = commands.add_parser("evaluate", help="Score a model on a dataset file.")
    ev.add_argument("--model", required=True, help="Model file.")
    ev.add_argument("--data", required=True, help="Dataset file to score.")
    ev.add_argument("--format", choices=FORMATS + ("structured-text",), default="table",
                    help="Report format for stdout or --out (default: %(default)s).")
    ev.add_argument("--out", default=None, help="Write the report here instead of stdout.")
    ev.add_argument("--csv-out", default=None, help="Also write the CSV report here.")
    ev.add_argument("--json-out", default=None, help="Also write the JSON report here.")
    ev.set_defaults(handler=cmd_evaluate)

    pr = commands.add_parser("predict", help="Write per-window predictions and class probabilities.")
    pr.add_argument("--model", required=True, help="Model file.")
    source = pr.add_mutually_exclusive_group(required=True)
    source.add_argument("--data", help="Dataset file of windows.")
    source.add_argument("--csv", nargs="+", help="Labeled flow CSV file(s), windowed raw.")
    pr.add_argument("--out", required=True, help="Predictions CSV path.")
    pr.set_defaults(handler=cmd_predict)

    rep = commands.add_parser("report", help="Re-render a saved JSON report.")
    rep.add_argument("input", help="JSON report written by evaluate.")
    rep.add_argument("--format", choices=FORMATS + ("structured-text",), default="table",
                     help="Output format (default: %(default)s).")
    rep.add_argument("--out", default=None, help="Write here instead of stdout.")
    rep.set_defaults(handler=cmd_report)
    return parser


def exit_code(error: Exception) -> int:
    if isinstance(error, ConfigError):
        return EXIT_USAGE
    if isinstance(error, (DataError, ShapeError)):
        return EXIT_DATA
    if isinstance(error, TrainingError):
        return EXIT_TRAINING
    return EXIT_IO


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as stop:
        return stop.code if isinstance(stop.code, int) else EXIT_USAGE
    setup_logging(args.verbose)
    new_context(command=args.command)
    try:
        return args.handler(args)
    except (ConfigError, DataError, ShapeError, TrainingError,
            ModelFormatError, OSError) as error:
        print(f"lstm-ids {args.command}: error: {error}", file=sys.stderr)
        logger.debug("Failure detail", exc_info=True)
        return exit_code(error)


if __name__ == "__main__":
    sys.exit(main())
