"""The reliability-metric suite on a synthetic 53-class prediction stream.

Builds a stream at exactly 99.7% accuracy with uniform class balance and
walks through the confusion matrix, Cohen's kappa, per-class Matthews
correlation, and the confidence interval.

Run:  python demos/04_reliability_metrics.py
"""

import numpy as np

from consgrunet import metrics as X
from consgrunet.data import LABEL_NAMES

per_class = 1000
errors_per_class = 3  # 0.3% of each class mislabeled
actual, predicted = [], []
for k in range(53):
    actual.extend([k] * per_class)
    predicted.extend([k] * (per_class - errors_per_class))
    predicted.extend([(k + j) % 53 for j in range(1, errors_per_class + 1)])

order = np.random.default_rng(0).permutation(len(actual))
actual = [actual[i] for i in order]
predicted = [predicted[i] for i in order]

cm = X.confusion_matrix(actual, predicted, 53)
print(f"N = {cm.total}, accuracy = {X.accuracy(cm):.4f}")

p_o, p_e = X.kappa_components(cm)
print(f"observed agreement P_o = {p_o:.6f}, chance agreement P_e = {p_e:.6f}")
print(f"Cohen's kappa = (P_o - P_e) / (1 - P_e) = {X.cohens_kappa(cm):.5f}")

mcc = X.per_class_mcc(cm)
kpc = X.per_class_kappa(cm)
print(f"macro MCC = {X.macro_mcc(cm):.5f}")
print()
print("worst five classes by one-vs-rest MCC:")
for k in np.argsort(mcc)[:5]:
    print(f"  {LABEL_NAMES[k][:40]:40s} mcc={mcc[k]:.5f} kappa={kpc[k]:.5f}")

print()
rates = X.precision_recall_f1(cm)
print(f"macro precision={rates.macro_precision:.5f} "
      f"recall={rates.macro_recall:.5f} f1={rates.macro_f1:.5f}")

# batch-accuracy confidence interval, the unit used by `consgrunet eval`
correct = np.array([a == p for a, p in zip(actual, predicted)], dtype=np.float64)
batch_acc = [correct[i : i + 64].mean() for i in range(0, len(correct), 64)]
ci = X.confidence_interval(batch_acc, 0.95)
print(f"95% CI over {ci.n} batch accuracies: "
      f"[{ci.lo:.5f}, {ci.hi:.5f}] around {ci.mean:.5f}")
