"""Brute-force metric oracles that enumerate raw label lists directly.

These deliberately avoid the confusion-matrix code path so that agreement
with `consgrunet.metrics` is a genuine dual-route check.
"""

import math


def oracle_kappa(actual, predicted):
    n = len(actual)
    observed = sum(1 for a, p in zip(actual, predicted) if a == p) / n
    classes = set(actual) | set(predicted)
    chance = sum(
        (sum(1 for a in actual if a == k) / n)
        * (sum(1 for p in predicted if p == k) / n)
        for k in classes
    )
    if 1.0 - chance < 1e-15:
        return 1.0
    return (observed - chance) / (1.0 - chance)


def oracle_counts(actual, predicted, k):
    tp = sum(1 for a, p in zip(actual, predicted) if a == k and p == k)
    fn = sum(1 for a, p in zip(actual, predicted) if a == k and p != k)
    fp = sum(1 for a, p in zip(actual, predicted) if a != k and p == k)
    tn = sum(1 for a, p in zip(actual, predicted) if a != k and p != k)
    return tp, tn, fp, fn


def oracle_mcc(actual, predicted, k):
    tp, tn, fp, fn = oracle_counts(actual, predicted, k)
    denom = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    if denom == 0.0:
        return 0.0
    return (tp * tn - fp * fn) / denom


def oracle_prf(actual, predicted, k):
    tp, _, fp, fn = oracle_counts(actual, predicted, k)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)) if precision + recall else 0.0
    return precision, recall, f1
