import math

import numpy as np
import pytest

from oracles import oracle_kappa, oracle_mcc, oracle_prf

from consgrunet import metrics as X
from consgrunet.errors import InputError


# confusion matrix ---------------------------------------------------------------

def test_confusion_perfect_diagonal():
    cm = X.confusion_matrix([0, 1, 2, 1], [0, 1, 2, 1], 3)
    assert np.trace(cm.counts) == 4
    assert cm.total == 4


def test_confusion_hand_tally():
    cm = X.confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1], 2)
    assert cm.counts.tolist() == [[1, 1], [0, 2]]


def test_confusion_rejects_empty_and_mismatch():
    with pytest.raises(InputError):
        X.confusion_matrix([], [], 2)
    with pytest.raises(InputError):
        X.confusion_matrix([0, 1], [0], 2)
    with pytest.raises(InputError):
        X.confusion_matrix([0, 2], [0, 1], 2)


# precision / recall / F1 --------------------------------------------------------

def test_prf_perfect_diagonal_is_all_ones():
    cm = X.confusion_matrix([0, 1, 2] * 5, [0, 1, 2] * 5, 3)
    rates = X.precision_recall_f1(cm)
    assert np.allclose(rates.precision, 1.0)
    assert np.allclose(rates.recall, 1.0)
    assert np.allclose(rates.f1, 1.0)


def test_prf_hand_case():
    cm = X.ConfusionMatrix(np.array([[45, 5], [10, 40]]))
    rates = X.precision_recall_f1(cm)
    assert rates.precision[0] == pytest.approx(45 / 55, abs=1e-12)
    assert rates.recall[0] == pytest.approx(0.90, abs=1e-12)
    assert rates.f1[0] == pytest.approx(2 * (45 / 55) * 0.9 / (45 / 55 + 0.9), abs=1e-12)
    assert rates.f1[0] == pytest.approx(0.8571, abs=5e-5)


def test_prf_absent_class_is_zero_by_convention():
    cm = X.confusion_matrix([0, 0, 1], [0, 0, 1], 3)
    rates = X.precision_recall_f1(cm)
    assert rates.precision[2] == rates.recall[2] == rates.f1[2] == 0.0


# kappa ---------------------------------------------------------------------------

def test_kappa_perfect_agreement():
    cm = X.confusion_matrix([0, 1, 1, 2], [0, 1, 1, 2], 3)
    assert X.cohens_kappa(cm) == 1.0


def test_kappa_hand_case_070():
    cm = X.ConfusionMatrix(np.array([[45, 5], [10, 40]]))
    p_o, p_e = X.kappa_components(cm)
    assert p_o == pytest.approx(0.85, abs=1e-12)
    assert p_e == pytest.approx(0.5, abs=1e-12)
    assert X.cohens_kappa(cm) == pytest.approx(0.70, abs=1e-12)


def test_kappa_single_class_degenerate():
    cm = X.ConfusionMatrix(np.array([[7, 0], [0, 0]]))
    assert X.cohens_kappa(cm) == 1.0


def test_kappa_bounded_by_accuracy():
    rng = np.random.default_rng(6)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        k = int(rng.integers(2, 6))
        actual = rng.integers(0, k, n)
        predicted = rng.integers(0, k, n)
        cm = X.confusion_matrix(actual, predicted, k)
        p_o, p_e = X.kappa_components(cm)
        if p_e < 1.0:
            assert X.cohens_kappa(cm) <= p_o + 1e-12


# MCC ------------------------------------------------------------------------------

def test_mcc_perfect_two_class():
    cm = X.confusion_matrix([0, 1] * 5, [0, 1] * 5, 2)
    assert X.matthews_cc(cm, 0) == pytest.approx(1.0)


def test_mcc_hand_case():
    cm = X.ConfusionMatrix(np.array([[45, 5], [10, 40]]))
    expected = (45 * 40 - 10 * 5) / math.sqrt(55 * 50 * 50 * 45)
    assert X.matthews_cc(cm, 0) == pytest.approx(expected, abs=1e-12)
    assert X.matthews_cc(cm, 0) == pytest.approx(0.7035, abs=5e-5)


def test_mcc_zero_denominator_defined_as_zero():
    cm = X.ConfusionMatrix(np.array([[4, 0], [0, 0]]))
    assert X.matthews_cc(cm, 1) == 0.0


def test_mcc_symmetric_under_role_swap():
    rng = np.random.default_rng(7)
    for _ in range(30):
        tp, tn, fp, fn = (int(v) for v in rng.integers(0, 20, 4))
        if tp + tn + fp + fn == 0:
            continue
        direct = X.matthews_cc(X.ConfusionMatrix(np.array([[tp, fn], [fp, tn]])), 0)
        swapped = X.matthews_cc(X.ConfusionMatrix(np.array([[tn, fp], [fn, tp]])), 0)
        assert direct == pytest.approx(swapped, abs=1e-12)


# oracle equivalence ----------------------------------------------------------------

def test_kappa_mcc_prf_match_enumeration_oracles():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(1, 51))
        k = int(rng.integers(2, 7))
        actual = [int(v) for v in rng.integers(0, k, n)]
        predicted = [int(v) for v in rng.integers(0, k, n)]
        cm = X.confusion_matrix(actual, predicted, k)
        assert X.cohens_kappa(cm) == pytest.approx(
            oracle_kappa(actual, predicted), abs=1e-9
        )
        rates = X.precision_recall_f1(cm)
        for cls in range(k):
            assert X.matthews_cc(cm, cls) == pytest.approx(
                oracle_mcc(actual, predicted, cls), abs=1e-9
            )
            precision, recall, f1 = oracle_prf(actual, predicted, cls)
            assert rates.precision[cls] == pytest.approx(precision, abs=1e-9)
            assert rates.recall[cls] == pytest.approx(recall, abs=1e-9)
            assert rates.f1[cls] == pytest.approx(f1, abs=1e-9)


def test_permutation_invariance():
    rng = np.random.default_rng(12)
    n, k = 120, 5
    actual = rng.integers(0, k, n)
    predicted = rng.integers(0, k, n)
    cm = X.confusion_matrix(actual, predicted, k)
    perm = rng.permutation(k)
    cm_p = X.confusion_matrix(perm[actual], perm[predicted], k)
    assert X.cohens_kappa(cm) == pytest.approx(X.cohens_kappa(cm_p), abs=1e-12)
    assert X.accuracy(cm) == pytest.approx(X.accuracy(cm_p), abs=1e-12)
    assert X.macro_mcc(cm) == pytest.approx(X.macro_mcc(cm_p), abs=1e-12)
    rates, rates_p = X.precision_recall_f1(cm), X.precision_recall_f1(cm_p)
    inverse = np.argsort(perm)
    for cls in range(k):
        assert rates.precision[cls] == pytest.approx(
            rates_p.precision[perm[cls]], abs=1e-12
        )
        assert X.matthews_cc(cm, cls) == pytest.approx(
            X.matthews_cc(cm_p, int(perm[cls])), abs=1e-12
        )
    assert np.allclose(rates.recall, rates_p.recall[perm])
    del inverse


def test_all_rates_in_bounds_random():
    rng = np.random.default_rng(13)
    for _ in range(50):
        n = int(rng.integers(1, 30))
        k = int(rng.integers(2, 6))
        cm = X.confusion_matrix(rng.integers(0, k, n), rng.integers(0, k, n), k)
        rates = X.precision_recall_f1(cm)
        for arr in (rates.precision, rates.recall, rates.f1):
            assert ((arr >= 0) & (arr <= 1)).all()
        assert -1.0 <= X.cohens_kappa(cm) <= 1.0
        for cls in range(k):
            assert -1.0 <= X.matthews_cc(cm, cls) <= 1.0
        assert ((X.per_class_kappa(cm) >= -1) & (X.per_class_kappa(cm) <= 1)).all()


# confidence intervals ---------------------------------------------------------------

def test_ci_identical_values_zero_width():
    ci = X.confidence_interval([0.5, 0.5, 0.5], 0.95)
    assert ci.lo == ci.hi == ci.mean == 0.5
    assert ci.std == 0.0


def test_ci_hand_case():
    ci = X.confidence_interval([0.99, 1.00, 0.98, 1.00, 0.99], 0.95)
    assert ci.mean == pytest.approx(0.992, abs=1e-12)
    assert ci.std == pytest.approx(0.0083666, abs=1e-6)
    assert ci.lo == pytest.approx(0.98467, abs=1e-5)
    assert ci.hi == pytest.approx(0.99933, abs=1e-5)
    assert ci.z == 1.960


def test_ci_width_scales_inverse_sqrt_n():
    rng = np.random.default_rng(3)
    values = list(rng.normal(0.9, 0.02, 50))
    base = X.confidence_interval(values, 0.95)
    doubled = X.confidence_interval(values * 4, 0.95)
    half_base = (base.hi - base.lo) / 2
    half_doubled = (doubled.hi - doubled.lo) / 2
    assert 2 * half_doubled == pytest.approx(half_base, rel=0.05)


def test_ci_errors_and_degenerate():
    with pytest.raises(InputError):
        X.confidence_interval([], 0.95)
    with pytest.raises(InputError):
        X.confidence_interval([0.5, 0.6], 0.91)
    with pytest.warns(UserWarning):
        ci = X.confidence_interval([0.7], 0.99)
    assert ci.lo == ci.hi == 0.7
    assert ci.z == 2.576


def test_ci_z_values():
    for confidence, z in ((0.90, 1.645), (0.95, 1.960), (0.99, 2.576)):
        ci = X.confidence_interval([0.1, 0.2, 0.3], confidence)
        assert ci.z == z


# report assembly and CSV -------------------------------------------------------------

def test_build_report_fields_consistent():
    rng = np.random.default_rng(21)
    actual = rng.integers(0, 4, 200)
    predicted = np.where(rng.uniform(size=200) < 0.9, actual, rng.integers(0, 4, 200))
    cm = X.confusion_matrix(actual, predicted, 4)
    batch_acc = [float(v) for v in rng.uniform(0.85, 1.0, 6)]
    report = X.build_report(cm, batch_acc)
    assert report.accuracy == pytest.approx(X.accuracy(cm))
    assert report.kappa == pytest.approx(X.cohens_kappa(cm))
    assert report.ci.lo <= report.ci.mean <= report.ci.hi
    assert (report.tp + report.fn == cm.counts.sum(axis=1)).all()
    assert (report.tp + report.fp == cm.counts.sum(axis=0)).all()
    assert ((report.tp + report.tn + report.fp + report.fn) == cm.total).all()
    assert report.p_expected == pytest.approx(X.kappa_components(cm)[1])


def test_csv_outputs(tmp_path):
    cm = X.confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1], 2)
    report = X.build_report(cm, [0.75, 0.75])
    report_path = tmp_path / "report.csv"
    confusion_path = tmp_path / "confusion.csv"
    X.write_report_csv(report, report_path, ["a", "b"])
    X.write_confusion_csv(cm, confusion_path, ["a", "b"])
    lines = report_path.read_text().splitlines()
    assert lines[0] == "class,precision,recall,f1,kappa,mcc"
    assert len(lines) == 3
    assert lines[1].startswith("a,1.0000,0.5000,")
    conf = confusion_path.read_text().splitlines()
    assert conf == ["a,b", "1,1", "0,2"]


def test_csv_deterministic(tmp_path):
    cm = X.confusion_matrix([0, 1, 1, 0], [0, 1, 0, 0], 2)
    report = X.build_report(cm, [0.75, 0.80])
    p1, p2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    X.write_report_csv(report, p1, ["x", "y"])
    X.write_report_csv(report, p2, ["x", "y"])
    assert p1.read_bytes() == p2.read_bytes()
