"""Seeded training loop, full-split evaluation, and the latency benchmark."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass

import numpy as np

from . import layers, metrics, model as model_mod
from .errors import ConfigError, DivergenceError
from .metrics import EvalReport
from .model import ModelState


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    early_stop: object = None  # optional callable(EpochLog) -> bool

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.lr < 0:
            raise ConfigError("learning rate must be >= 0")


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    seconds: float


@dataclass
class LatencyStats:
    iterations: int
    warmup: int
    mean_ms: float
    p50_ms: float
    p95_ms: float
    min_ms: float
    max_ms: float
    preprocessing_included: bool


def _window_input(window) -> np.ndarray:
    # Window stores [L, C]; the model consumes [C, L].
    return np.ascontiguousarray(window.values.array.T)


def _forward_logits(m: ModelState, params: dict, window) -> tuple:
    return model_mod.forward_window_arrays(
        m.config, params, m.mu.array, m.sigma.array, _window_input(window)
    )


def dataset_loss_accuracy(m: ModelState, windows, batch_size: int = 64) -> tuple:
    """(mean cross-entropy, accuracy) of a window list under the model."""
    if not windows:
        raise ConfigError("cannot evaluate an empty window list")
    params = m.parameters()
    total_loss = 0.0
    correct = 0
    for start in range(0, len(windows), batch_size):
        chunk = windows[start : start + batch_size]
        logits = np.stack([_forward_logits(m, params, w)[0] for w in chunk])
        targets = [w.label for w in chunk]
        loss, _ = layers.softmax_cross_entropy_arrays(logits, targets)
        total_loss += loss * len(chunk)
        correct += int((logits.argmax(axis=1) == np.asarray(targets)).sum())
    return total_loss / len(windows), correct / len(windows)


def predict_windows(m: ModelState, windows) -> tuple:
    """(predicted class ids, softmax confidence of the prediction) per window."""
    params = m.parameters()
    preds = np.empty(len(windows), dtype=np.int64)
    confs = np.empty(len(windows), dtype=np.float64)
    for i, w in enumerate(windows):
        logits, _ = _forward_logits(m, params, w)
        shifted = logits - logits.max()
        probs = np.exp(shifted)
        probs /= probs.sum()
        preds[i] = int(logits.argmax())
        confs[i] = float(probs[preds[i]])
    return preds, confs


def train(m: ModelState, windows, split, cfg: TrainConfig) -> tuple:
    """Mini-batch Adam training; returns (best-validation checkpoint, logs).

    Each epoch reshuffles the training windows with the run's seeded
    generator, then logs full-pass train and validation metrics. The
    checkpoint with the best validation accuracy wins; ties go to the
    latest epoch.
    """
    cfg.validate()
    train_windows = [windows[i] for i in split.train]
    val_windows = [windows[i] for i in split.val]
    if not train_windows or not val_windows:
        raise ConfigError("train and validation partitions must both be nonempty")
    params = m.parameters()
    adam = layers.init_adam(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    rng = np.random.default_rng(cfg.seed)
    logs = []
    best_acc = -1.0
    best_state = None
    for epoch in range(cfg.epochs):
        started = time.perf_counter()
        order = rng.permutation(len(train_windows))
        for batch_idx, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = [train_windows[i] for i in order[start : start + cfg.batch_size]]
            caches = []
            logit_rows = []
            for w in batch:
                logits, cache = _forward_logits(m, params, w)
                logit_rows.append(logits)
                caches.append(cache)
            loss, grad_logits = layers.softmax_cross_entropy_arrays(
                np.stack(logit_rows), [w.label for w in batch]
            )
            if not math.isfinite(loss):
                raise DivergenceError(epoch, batch_idx, loss)
            grads = None
            for row, cache in enumerate(caches):
                g = model_mod.backward_window_arrays(cache, grad_logits[row])
                if grads is None:
                    grads = g
                else:
                    for name in grads:
                        grads[name] += g[name]
            layers.adam_step(params, grads, adam)
        train_loss, train_acc = dataset_loss_accuracy(m, train_windows, cfg.batch_size)
        val_loss, val_acc = dataset_loss_accuracy(m, val_windows, cfg.batch_size)
        log = EpochLog(
            epoch=epoch,
            train_loss=train_loss,
            train_acc=train_acc,
            val_loss=val_loss,
            val_acc=val_acc,
            seconds=time.perf_counter() - started,
        )
        logs.append(log)
        if val_acc >= best_acc:
            best_acc = val_acc
            best_state = m.clone()
        if cfg.early_stop is not None and cfg.early_stop(log):
            break
    return best_state, logs


def write_train_log(logs, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "train_acc", "val_loss",
                         "val_acc", "seconds"])
        for log in logs:
            writer.writerow([
                log.epoch,
                f"{log.train_loss:.6f}",
                f"{log.train_acc:.6f}",
                f"{log.val_loss:.6f}",
                f"{log.val_acc:.6f}",
                f"{log.seconds:.3f}",
            ])


def evaluate(m: ModelState, windows, labels=None, ci_unit: str = "batch",
             ci_batch: int = 64, confidence: float = 0.95) -> EvalReport:
    """Forward every window, argmax, and assemble the full metric report.

    The confidence interval is computed over per-batch accuracies
    (consecutive chunks of `ci_batch` windows) or, with ci_unit="window",
    over per-window 0/1 correctness.
    """
    if not windows:
        raise ConfigError("cannot evaluate an empty window list")
    if ci_unit not in ("batch", "window"):
        raise ConfigError(f"ci_unit must be 'batch' or 'window', got {ci_unit!r}")
    if labels is None:
        labels = [w.label for w in windows]
    preds, _ = predict_windows(m, windows)
    cm = metrics.confusion_matrix(labels, preds, m.config.num_classes)
    correct = (preds == np.asarray(labels)).astype(np.float64)
    if ci_unit == "window":
        ci_values = correct
    else:
        ci_values = [
            correct[i : i + ci_batch].mean() for i in range(0, len(correct), ci_batch)
        ]
    return metrics.build_report(cm, ci_values, confidence)


def _nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    idx = max(1, math.ceil(q * len(sorted_values)))
    return float(sorted_values[idx - 1])


def bench_latency(m: ModelState, window, iterations: int = 500, warmup: int = 50,
                  include_preprocessing: bool = False) -> LatencyStats:
    """Time single-window inference with a monotonic clock.

    Warmup runs are excluded from the statistics. With preprocessing
    excluded (the default), normalization happens once outside the timed
    region and the timer covers the network forward pass alone.
    """
    if iterations < 1 or warmup < 0:
        raise ConfigError("need iterations >= 1 and warmup >= 0")
    params = m.parameters()
    x = _window_input(window) if hasattr(window, "values") else np.asarray(window)
    cfg = m.config
    mu, sigma = m.mu.array, m.sigma.array

    if include_preprocessing:
        def run(raw=x):
            return model_mod.forward_window_arrays(cfg, params, mu, sigma, raw)
    else:
        pre = (x - mu[:, None]) / sigma[:, None]

        def run(normed=pre):
            return model_mod.forward_normalized_arrays(cfg, params, normed)

    for _ in range(warmup):
        run()
    samples_ms = np.empty(iterations, dtype=np.float64)
    for i in range(iterations):
        t0 = time.perf_counter_ns()
        run()
        samples_ms[i] = (time.perf_counter_ns() - t0) / 1e6
    ordered = np.sort(samples_ms)
    return LatencyStats(
        iterations=iterations,
        warmup=warmup,
        mean_ms=float(samples_ms.mean()),
        p50_ms=_nearest_rank(ordered, 0.50),
        p95_ms=_nearest_rank(ordered, 0.95),
        min_ms=float(ordered[0]),
        max_ms=float(ordered[-1]),
        preprocessing_included=include_preprocessing,
    )
