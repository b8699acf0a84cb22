"""Command-line entry point: make-synth, train, eval, predict, bench, info.

Exit codes: 0 success, 1 usage/configuration error, 2 data or session-file
error, 3 model error, 4 training divergence.

The training workflow (windowing, split, hyperparameters) is configured by
a plain key=value text file, the same grammar as the model-file header.
Workflow keys are stored in the trained model's header so that `eval` and
`predict` can rebuild windows and splits without re-supplying the config.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import model as model_mod
from . import runtime
from .errors import (
    ConfigError,
    DimensionError,
    DivergenceError,
    FormatError,
    InputError,
    LabelError,
)
from .model import ConvBlockConfig, ModelConfig

USAGE_EXIT = 1
DATA_EXIT = 2
MODEL_EXIT = 3
DIVERGENCE_EXIT = 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# workflow configuration (key=value file)
# ---------------------------------------------------------------------------

@dataclass
class WorkflowSettings:
    model: ModelConfig = field(default_factory=ModelConfig)
    window_stride: int = 10
    transition_policy: str = "majority"
    split_mode: str = "random"
    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1
    test_reps: tuple = (2, 5, 7)
    val_reps: tuple = (1,)
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def _parse_conv_blocks(text: str) -> tuple:
    try:
        return tuple(
            ConvBlockConfig(*(int(p) for p in item.split(":")))
            for item in text.split(",")
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad conv_blocks value {text!r}: {exc}") from exc


def _format_conv_blocks(blocks) -> str:
    return ",".join(f"{b.out_channels}:{b.kernel}:{b.stride}:{b.padding}"
                    for b in blocks)


def _parse_reps(text: str) -> tuple:
    if not text.strip():
        return ()
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad repetition list {text!r}") from exc


_INT_KEYS = {"input_channels", "window_len", "gru_hidden", "dense_hidden",
             "num_classes", "seed", "window_stride", "epochs", "batch_size"}
_FLOAT_KEYS = {"train_frac", "val_frac", "test_frac", "lr", "beta1", "beta2", "eps"}
_STR_KEYS = {"transition_policy", "split_mode"}
_LIST_KEYS = {"test_reps", "val_reps"}
_MODEL_KEYS = {"input_channels", "window_len", "conv_blocks", "gru_hidden",
               "dense_hidden", "num_classes", "seed"}


def parse_settings(mapping: dict) -> WorkflowSettings:
    settings = WorkflowSettings()
    model_fields = {}
    for key, raw in mapping.items():
        if key == "conv_blocks":
            model_fields[key] = _parse_conv_blocks(raw)
            continue
        try:
            if key in _INT_KEYS:
                value = int(raw)
            elif key in _FLOAT_KEYS:
                value = float(raw)
            elif key in _STR_KEYS:
                value = raw
            elif key in _LIST_KEYS:
                value = _parse_reps(raw)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        if key in _MODEL_KEYS:
            model_fields[key] = value
        else:
            setattr(settings, key, value)
    if settings.split_mode not in ("random", "by_repetition"):
        raise ConfigError(f"split_mode must be random or by_repetition, "
                          f"got {settings.split_mode!r}")
    if settings.transition_policy not in ("majority", "drop"):
        raise ConfigError(f"transition_policy must be majority or drop, "
                          f"got {settings.transition_policy!r}")
    settings.model = replace(settings.model, **model_fields)
    return settings


def read_config_file(path) -> dict:
    mapping = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(USAGE_EXIT, f"cannot read config file {path}: {exc}")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        mapping[key.strip()] = value.strip()
    return mapping


def settings_to_extras(settings: WorkflowSettings) -> dict:
    return {
        "window_stride": str(settings.window_stride),
        "transition_policy": settings.transition_policy,
        "split_mode": settings.split_mode,
        "train_frac": repr(settings.train_frac),
        "val_frac": repr(settings.val_frac),
        "test_frac": repr(settings.test_frac),
        "test_reps": ",".join(str(r) for r in settings.test_reps),
        "val_reps": ",".join(str(r) for r in settings.val_reps),
        "epochs": str(settings.epochs),
        "batch_size": str(settings.batch_size),
        "lr": repr(settings.lr),
        "beta1": repr(settings.beta1),
        "beta2": repr(settings.beta2),
        "eps": repr(settings.eps),
    }


def settings_from_model(state) -> WorkflowSettings:
    settings = parse_settings(dict(state.extras))
    settings.model = state.config
    return settings


def _split_for(settings: WorkflowSettings, windows, seed: int):
    if settings.split_mode == "random":
        mode = data_mod.RandomSplit(settings.train_frac, settings.val_frac,
                                    settings.test_frac)
    else:
        mode = data_mod.RepetitionSplit(frozenset(settings.test_reps),
                                        frozenset(settings.val_reps))
    return data_mod.split_windows(windows, mode, seed)


# ---------------------------------------------------------------------------
# guarded loaders
# ---------------------------------------------------------------------------

def _load_model(path):
    try:
        return model_mod.load_model(path)
    except OSError as exc:
        raise CliError(MODEL_EXIT, f"model {path}: {exc}")
    except (FormatError, ConfigError, DimensionError) as exc:
        raise CliError(MODEL_EXIT, f"model {path}: {exc}")


def _load_windows(directory, settings: WorkflowSettings):
    try:
        windows = data_mod.load_windows(
            directory,
            settings.model.window_len,
            settings.window_stride,
            settings.transition_policy,
        )
    except OSError as exc:
        raise CliError(DATA_EXIT, f"data {directory}: {exc}")
    except (FormatError, LabelError, InputError) as exc:
        raise CliError(DATA_EXIT, f"data {directory}: {exc}")
    if not windows:
        raise CliError(DATA_EXIT, f"data {directory}: produced no windows")
    return windows


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_make_synth(args) -> int:
    data_mod.make_synthetic(
        args.out, args.classes, args.channels, args.window,
        args.per_class, args.noise, args.seed,
    )
    print(f"wrote {args.classes} session files to {args.out}")
    return 0


def cmd_train(args) -> int:
    mapping = read_config_file(args.config) if args.config else {}
    settings = parse_settings(mapping)
    if args.split is not None:
        settings.split_mode = {"random": "random", "by-rep": "by_repetition"}[args.split]
    if args.seed is not None:
        settings.model = replace(settings.model, seed=args.seed)
    seed = settings.model.seed

    windows = _load_windows(args.data, settings)
    split = _split_for(settings, windows, seed)
    if not split.train or not split.val:
        raise CliError(DATA_EXIT,
                       "split produced an empty train or validation partition")
    try:
        state = model_mod.build_model(settings.model)
    except ConfigError as exc:
        raise CliError(USAGE_EXIT, f"model config: {exc}")
    mu, sigma = data_mod.fit_normalizer([windows[i] for i in split.train])
    state.set_normalization(mu, sigma)
    state.extras = settings_to_extras(settings)
    train_cfg = runtime.TrainConfig(
        epochs=settings.epochs, batch_size=settings.batch_size, lr=settings.lr,
        beta1=settings.beta1, beta2=settings.beta2, eps=settings.eps, seed=seed,
    )
    best, logs = runtime.train(state, windows, split, train_cfg)
    model_mod.save_model(best, args.out)
    if args.log:
        runtime.write_train_log(logs, args.log)
    last = logs[-1]
    print(
        f"trained {len(logs)} epochs: train_acc={last.train_acc:.4f} "
        f"val_acc={last.val_acc:.4f} model={args.out}"
    )
    return 0


def cmd_eval(args) -> int:
    state = _load_model(args.model)
    settings = settings_from_model(state)
    windows = _load_windows(args.data, settings)
    split = _split_for(settings, windows, state.config.seed)
    part = args.part
    if part == "all":
        selected = windows
    else:
        indices = split.partitions()[part]
        if not indices:
            raise CliError(DATA_EXIT, f"{part} partition is empty")
        selected = [windows[i] for i in indices]
    try:
        report = runtime.evaluate(state, selected, ci_unit=args.ci_unit)
    except DimensionError as exc:
        raise CliError(MODEL_EXIT, f"evaluation: {exc}")
    names = data_mod.class_names_for(state.config.num_classes)
    from . import metrics as metrics_mod

    metrics_mod.write_report_csv(report, args.report, names)
    metrics_mod.write_confusion_csv(report.confusion, args.confusion, names)
    print(
        f"accuracy={report.accuracy:.4f} kappa={report.kappa:.4f} "
        f"macro_mcc={report.macro_mcc:.4f} "
        f"ci=[{report.ci.lo:.4f},{report.ci.hi:.4f}]"
    )
    return 0


def cmd_predict(args) -> int:
    state = _load_model(args.model)
    settings = settings_from_model(state)
    try:
        session = data_mod.load_session(args.session)
        windows = data_mod.make_windows(
            session, state.config.window_len, settings.window_stride,
            settings.transition_policy,
        )
    except (OSError, FormatError, LabelError) as exc:
        raise CliError(DATA_EXIT, f"session {args.session}: {exc}")
    if not windows:
        raise CliError(DATA_EXIT, f"session {args.session}: produced no windows")
    try:
        preds, confs = runtime.predict_windows(state, windows)
    except DimensionError as exc:
        raise CliError(MODEL_EXIT, f"prediction: {exc}")
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["offset", "predicted_class", "confidence"])
        for w, p, c in zip(windows, preds, confs):
            writer.writerow([w.offset, int(p), f"{c:.4f}"])
    print(f"wrote {len(windows)} predictions to {args.out}")
    return 0


def cmd_bench(args) -> int:
    state = _load_model(args.model)
    cfg = state.config
    rng = np.random.default_rng(123)
    window = rng.standard_normal((cfg.input_channels, cfg.window_len)).astype(np.float32)
    stats = runtime.bench_latency(
        state, window, iterations=args.iters, warmup=args.warmup,
        include_preprocessing=args.with_preprocessing,
    )
    print(
        f"latency_ms mean={stats.mean_ms:.3f} p50={stats.p50_ms:.3f} "
        f"p95={stats.p95_ms:.3f} min={stats.min_ms:.3f} max={stats.max_ms:.3f} "
        f"iters={stats.iterations} warmup={stats.warmup} "
        f"preprocessing={'yes' if stats.preprocessing_included else 'no'}"
    )
    return 0


def cmd_info(args) -> int:
    state = _load_model(args.model)
    total, breakdown = model_mod.count_params(state)
    size = Path(args.model).stat().st_size
    cfg = state.config
    print(f"model={args.model}")
    print(f"file_size_bytes={size}")
    print(f"parameters={total}")
    for name, count in breakdown.items():
        print(f"parameters.{name}={count}")
    print(f"input_channels={cfg.input_channels}")
    print(f"window_len={cfg.window_len}")
    print(f"conv_blocks={_format_conv_blocks(cfg.conv_blocks)}")
    print(f"gru_hidden={cfg.gru_hidden}")
    print(f"dense_hidden={cfg.dense_hidden}")
    print(f"num_classes={cfg.num_classes}")
    print(f"seed={cfg.seed}")
    for key in sorted(state.extras):
        print(f"{key}={state.extras[key]}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="consgrunet",
                     description="sEMG gesture recognition toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-synth", help="generate synthetic ESF1 sessions")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--channels", type=int, default=10)
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_synth)

    p = sub.add_parser("train", help="train a model on a session directory")
    p.add_argument("--data", required=True, help="directory of .esf files")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--log", help="training-curve CSV to write")
    p.add_argument("--split", choices=["random", "by-rep"])
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model and write metric CSVs")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--confusion", required=True)
    p.add_argument("--ci-unit", choices=["batch", "window"], default="batch")
    p.add_argument("--part", choices=["train", "val", "test", "all"], default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="per-window predictions for one session")
    p.add_argument("--model", required=True)
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="single-window inference latency")
    p.add_argument("--model", required=True)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--warmup", type=int, default=50)
    p.add_argument("--with-preprocessing", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("info", help="model config, parameter count, file size")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_info)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return USAGE_EXIT
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DIVERGENCE_EXIT
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (FormatError, LabelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except DimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return MODEL_EXIT


if __name__ == "__main__":
    sys.exit(main())
