"""Classification reliability metrics and the evaluation report.

Conventions, pinned by tests:
  * Cohen's kappa = (P_o - P_e) / (1 - P_e), where P_o is the observed
    agreement (accuracy) and P_e the chance agreement from the marginals.
    The degenerate all-one-class case returns 1.0.
  * MCC uses the standard four-factor denominator
    sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN)); a zero denominator yields 0.
  * Per-class kappa and MCC collapse the confusion matrix one-vs-rest.
  * Ratios with a 0/0 form (precision, recall, F1) are defined as 0.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

Z_TABLE = {0.90: 1.645, 0.95: 1.960, 0.99: 2.576}


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # [K, K], rows = actual, cols = predicted

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise InputError(f"confusion matrix must be square, got {self.counts.shape}")
        if self.counts.shape[0] < 2:
            raise InputError("confusion matrix needs at least 2 classes")
        if (self.counts < 0).any():
            raise InputError("confusion matrix entries must be >= 0")

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_matrix(actual, predicted, num_classes: int) -> ConfusionMatrix:
    actual = np.asarray(actual, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if actual.shape != predicted.shape or actual.ndim != 1:
        raise InputError(
            f"actual and predicted lengths differ: {actual.shape} vs {predicted.shape}"
        )
    if actual.size == 0:
        raise InputError("need at least one (actual, predicted) pair")
    for name, arr in (("actual", actual), ("predicted", predicted)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise InputError(
                f"{name} class outside [0, {num_classes}): "
                f"{int(arr.min())}..{int(arr.max())}"
            )
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (actual, predicted), 1)
    return ConfusionMatrix(counts)


def one_vs_rest(cm: ConfusionMatrix, k: int) -> tuple:
    """(TP, TN, FP, FN) for class k against all others."""
    counts = cm.counts
    tp = int(counts[k, k])
    fn = int(counts[k].sum()) - tp
    fp = int(counts[:, k].sum()) - tp
    tn = cm.total - tp - fn - fp
    return tp, tn, fp, fn


def _safe_ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


@dataclass
class PrecisionRecallF1:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray

    @property
    def macro_precision(self) -> float:
        return float(self.precision.mean())

    @property
    def macro_recall(self) -> float:
        return float(self.recall.mean())

    @property
    def macro_f1(self) -> float:
        return float(self.f1.mean())


def precision_recall_f1(cm: ConfusionMatrix) -> PrecisionRecallF1:
    k = cm.num_classes
    precision = np.zeros(k)
    recall = np.zeros(k)
    f1 = np.zeros(k)
    for i in range(k):
        tp, _, fp, fn = one_vs_rest(cm, i)
        precision[i] = _safe_ratio(tp, tp + fp)
        recall[i] = _safe_ratio(tp, tp + fn)
        f1[i] = _safe_ratio(2 * precision[i] * recall[i], precision[i] + recall[i])
    return PrecisionRecallF1(precision, recall, f1)


def accuracy(cm: ConfusionMatrix) -> float:
    return float(np.trace(cm.counts)) / cm.total


def cohens_kappa(cm: ConfusionMatrix) -> float:
    n = cm.total
    if n == 0:
        raise InputError("empty confusion matrix")
    p_o = float(np.trace(cm.counts)) / n
    rows = cm.counts.sum(axis=1).astype(np.float64)
    cols = cm.counts.sum(axis=0).astype(np.float64)
    p_e = float((rows * cols).sum()) / (n * n)
    if 1.0 - p_e < 1e-15:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def kappa_components(cm: ConfusionMatrix) -> tuple:
    """(P_o, P_e) behind the overall kappa."""
    n = cm.total
    p_o = float(np.trace(cm.counts)) / n
    rows = cm.counts.sum(axis=1).astype(np.float64)
    cols = cm.counts.sum(axis=0).astype(np.float64)
    return p_o, float((rows * cols).sum()) / (n * n)


def _binary_kappa(tp: int, tn: int, fp: int, fn: int) -> float:
    n = tp + tn + fp + fn
    p_o = (tp + tn) / n
    p_e = ((tp + fn) * (tp + fp) + (fp + tn) * (fn + tn)) / (n * n)
    if 1.0 - p_e < 1e-15:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def per_class_kappa(cm: ConfusionMatrix) -> np.ndarray:
    return np.array(
        [_binary_kappa(*one_vs_rest(cm, k)) for k in range(cm.num_classes)]
    )


def matthews_cc(cm: ConfusionMatrix, k: int) -> float:
    tp, tn, fp, fn = one_vs_rest(cm, k)
    denom = math.sqrt(float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    if denom == 0.0:
        return 0.0
    return (tp * tn - fp * fn) / denom


def per_class_mcc(cm: ConfusionMatrix) -> np.ndarray:
    return np.array([matthews_cc(cm, k) for k in range(cm.num_classes)])


def macro_mcc(cm: ConfusionMatrix) -> float:
    return float(per_class_mcc(cm).mean())


@dataclass
class ConfidenceInterval:
    lo: float
    hi: float
    mean: float
    std: float
    n: int
    z: float


def confidence_interval(values, confidence: float = 0.95) -> ConfidenceInterval:
    """mean +/- z * s / sqrt(n), s with the n-1 denominator."""
    if confidence not in Z_TABLE:
        raise InputError(
            f"confidence must be one of {sorted(Z_TABLE)}, got {confidence}"
        )
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise InputError("need at least one metric sample")
    z = Z_TABLE[confidence]
    mean = float(values.mean())
    if values.size == 1:
        warnings.warn("single metric sample: degenerate zero-width interval",
                      stacklevel=2)
        return ConfidenceInterval(mean, mean, mean, 0.0, 1, z)
    std = float(values.std(ddof=1))
    half = z * std / math.sqrt(values.size)
    return ConfidenceInterval(mean - half, mean + half, mean, std, int(values.size), z)


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    accuracy: float
    rates: PrecisionRecallF1
    kappa: float
    p_observed: float
    p_expected: float
    kappa_per_class: np.ndarray
    mcc_per_class: np.ndarray
    macro_mcc: float
    tp: np.ndarray
    tn: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    ci: ConfidenceInterval
    latency: object = None
    extra: dict = field(default_factory=dict)


def build_report(cm: ConfusionMatrix, ci_values, confidence: float = 0.95) -> EvalReport:
    p_o, p_e = kappa_components(cm)
    ovr = np.array([one_vs_rest(cm, k) for k in range(cm.num_classes)], dtype=np.int64)
    return EvalReport(
        confusion=cm,
        accuracy=accuracy(cm),
        rates=precision_recall_f1(cm),
        kappa=cohens_kappa(cm),
        p_observed=p_o,
        p_expected=p_e,
        kappa_per_class=per_class_kappa(cm),
        mcc_per_class=per_class_mcc(cm),
        macro_mcc=macro_mcc(cm),
        tp=ovr[:, 0],
        tn=ovr[:, 1],
        fp=ovr[:, 2],
        fn=ovr[:, 3],
        ci=confidence_interval(ci_values, confidence),
    )


def write_report_csv(report: EvalReport, path, class_names):
    if len(class_names) != report.confusion.num_classes:
        raise InputError("one class name per class is required")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["class", "precision", "recall", "f1", "kappa", "mcc"])
        for k, name in enumerate(class_names):
            writer.writerow([
                name,
                f"{report.rates.precision[k]:.4f}",
                f"{report.rates.recall[k]:.4f}",
                f"{report.rates.f1[k]:.4f}",
                f"{report.kappa_per_class[k]:.4f}",
                f"{report.mcc_per_class[k]:.4f}",
            ])


def write_confusion_csv(cm: ConfusionMatrix, path, class_names):
    if len(class_names) != cm.num_classes:
        raise InputError("one class name per class is required")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(class_names)
        for row in cm.counts:
            writer.writerow([int(v) for v in row])
