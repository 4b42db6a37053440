"""Command-line interface: ``irregular-har {synth,perturb,windows,train,sweep,report}``.

Exit codes: 0 success, 1 user error (bad flags, config or input data),
2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import traceback
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import evaluation, report
from .core import Dataset
from .evaluation import ExperimentSpec, TrainConfig, derive_seed, run_sweep
from .ingest import CsvSchema, SynthConfig, format_float, load_csv, synth_generate, write_csv
from .models import ARCHITECTURES, ModelConfig, build_model, save_checkpoint
from .perturb import downsample, jitter_timestamps, random_dropout
from .windowing import sliding_windows

log = logging.getLogger("irregular_har")


class UserError(Exception):
    """Invalid invocation or input; reported without a traceback, exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise UserError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UserError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UserError(f"{path}: top level must be a JSON object")
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_dataset(args) -> Dataset:
    """Load ``args.input`` using column flags, inferring channels when omitted."""
    path = args.input
    if not Path(path).exists():
        raise UserError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise UserError(f"{path}: empty file")
    ts_col = args.timestamp_column
    if ts_col is None and "timestamp" in header:
        ts_col = "timestamp"
    if ts_col == "":
        ts_col = None
    reserved = {args.subject_column, args.label_column, ts_col}
    channels = (
        [c.strip() for c in args.channels.split(",")]
        if args.channels
        else [c for c in header if c not in reserved]
    )
    schema = CsvSchema(tuple(channels), args.subject_column, args.label_column, ts_col)
    rate = args.sample_rate
    if rate is None:
        if ts_col is None:
            raise UserError("--sample-rate is required for files without timestamps")
        ds = load_csv(path, schema, 1.0)
        t = ds.recordings[0][1].timestamps
        if len(t) < 2:
            raise UserError("cannot infer the sample rate from a single sample")
        rate = 1.0 / float(np.median(np.diff(t)))
    return load_csv(path, schema, rate)


# ------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    cfg = _read_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    try:
        config = SynthConfig(**cfg)
    except TypeError as exc:
        raise UserError(f"bad synth config: {exc}") from None
    ds = synth_generate(config)
    path = _out_dir(args) / args.name
    write_csv(ds, path, include_timestamps=not args.no_timestamps)
    print(path)
    return 0


def cmd_perturb(args) -> int:
    chosen = [n for n in ("jitter", "dropout", "downsample") if getattr(args, n) is not None]
    if len(chosen) != 1:
        raise UserError("give exactly one of --jitter, --dropout, --downsample")
    ds = _read_dataset(args)
    seed = args.seed if args.seed is not None else 0

    def apply(idx, series):
        s = derive_seed(seed, idx)
        if args.jitter is not None:
            return jitter_timestamps(series, args.jitter, s)
        if args.dropout is not None:
            return random_dropout(series, args.dropout, s)
        return downsample(series, args.downsample)

    out = Dataset(
        tuple((sid, apply(i, s)) for i, (sid, s) in enumerate(ds.recordings)),
        ds.class_names,
        ds.channel_names,
    )
    write_csv(out, args.output, include_timestamps=True)
    print(args.output)
    return 0


def cmd_windows(args) -> int:
    ds = _read_dataset(args)
    path = _out_dir(args) / args.name
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", "window", "start_time", "label", "n_samples", "mean_elapsed"])
        for sid, series in ds.recordings:
            for i, win in enumerate(sliding_windows(series, args.window, args.step, sid)):
                w.writerow(
                    [sid, i, format_float(win.start_time), ds.class_names[win.label],
                     len(win), format_float(float(win.elapsed.mean()))]
                )
    print(path)
    return 0


def cmd_train(args) -> int:
    cfg = _read_config(args.config)
    ds = _read_dataset(args)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    training = TrainConfig(**cfg.get("training", {}))
    windows = evaluation.subject_windows(ds, args.window, args.step)
    test_subject = None
    if args.test_subject is not None:
        matches = [s for s in ds.subjects if str(s) == args.test_subject]
        if not matches:
            raise UserError(f"unknown subject {args.test_subject!r}")
        test_subject = matches[0]
    pool = [w for s, ws in windows.items() if s != test_subject for w in ws]
    train_w, val_w = evaluation.validation_split(
        pool, training.val_fraction, derive_seed(seed, "val")
    )
    rate = ds.recordings[0][1].sample_rate
    config = ModelConfig(
        architecture=args.arch,
        input_channels=ds.num_channels,
        num_classes=ds.num_classes,
        window_len=int(round(args.window * rate)) if args.arch != "cfc_net" else None,
        hidden_size=int(cfg.get("hidden_size", 32)),
        conv_channels=int(cfg.get("conv_channels", 16)),
        kernel_size=int(cfg.get("kernel_size", 5)),
        seed=derive_seed(seed, "init"),
    )
    model = evaluation.train(build_model(config), train_w, val_w, training, derive_seed(seed, "train"))
    out = _out_dir(args)
    save_checkpoint(model, out / "model.ckpt")
    metrics = {"train_macro_f1": evaluation.evaluate_f1(model, train_w, ds.num_classes)}
    if test_subject is not None:
        metrics["test_subject"] = str(test_subject)
        metrics["test_macro_f1"] = evaluation.evaluate_f1(
            model, windows[test_subject], ds.num_classes
        )
    metrics["history"] = model.history
    with open(out / "train_metrics.json", "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(out / "model.ckpt")
    return 0


def cmd_sweep(args) -> int:
    cfg = _read_config(args.config)
    if args.seed is not None:
        cfg["seeds"] = [args.seed]
    if args.jobs is not None:
        cfg["n_jobs"] = args.jobs
    try:
        spec = ExperimentSpec.from_dict(cfg)
    except (TypeError, KeyError) as exc:
        raise UserError(f"bad sweep config: {exc}") from None
    result = run_sweep(spec)
    out = _out_dir(args)
    result.write_csv(out / "results.csv")
    result.write_summary(out / "summary.json")
    print(out / "results.csv")
    return 0


def cmd_report(args) -> int:
    if not Path(args.results).exists():
        raise UserError(f"results file not found: {args.results}")
    rows = evaluation.read_results_csv(args.results)
    if not rows:
        raise UserError(f"{args.results}: no result rows")
    paths = report.write_report(rows, _out_dir(args))
    for p in paths.values():
        print(p)
    return 0


def _add_csv_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--subject-column", default="subject")
    p.add_argument("--label-column", default="label")
    p.add_argument("--timestamp-column", default=None,
                   help="defaults to 'timestamp' when present; '' forces synthesized times")
    p.add_argument("--channels", default=None, help="comma-separated channel columns")
    p.add_argument("--sample-rate", type=float, default=None, help="Hz")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(
        prog="irregular-har",
        description="Simulate irregular sampling and benchmark classifier robustness.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic dataset CSV")
    p.add_argument("--name", default="synth.csv")
    p.add_argument("--no-timestamps", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("perturb", parents=[common], help="jitter, drop or decimate a CSV")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--jitter", type=float, default=None, metavar="EPS")
    p.add_argument("--dropout", type=float, default=None, metavar="ALPHA")
    p.add_argument("--downsample", type=int, default=None, metavar="K")
    _add_csv_flags(p)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("windows", parents=[common], help="list sliding windows of a CSV")
    p.add_argument("input")
    p.add_argument("--window", type=float, default=2.0)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--name", default="windows.csv")
    _add_csv_flags(p)
    p.set_defaults(func=cmd_windows)

    p = sub.add_parser("train", parents=[common], help="train one model on a CSV")
    p.add_argument("input")
    p.add_argument("--arch", choices=ARCHITECTURES, default="conv_dense")
    p.add_argument("--test-subject", default=None)
    p.add_argument("--window", type=float, default=2.0)
    p.add_argument("--step", type=float, default=1.0)
    _add_csv_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", parents=[common], help="run a robustness sweep")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", parents=[common], help="aggregate results.csv")
    p.add_argument("results")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UserError, ValueError, evaluation.SweepError, FileNotFoundError) as exc:
        print(f"irregular-har {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
