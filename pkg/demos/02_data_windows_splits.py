"""Session files, windowing policies, and leakage-controlled splits.

Run:  python demos/02_data_windows_splits.py
"""

import tempfile
from collections import Counter
from pathlib import Path

import numpy as np

from consgrunet import data as D

workdir = Path(tempfile.mkdtemp(prefix="consgrunet_demo_"))
print("writing synthetic sessions to", workdir)
paths = D.make_synthetic(workdir, num_classes=5, channels=4, window_len=20,
                         windows_per_class=40, noise_sd=0.1, seed=0)
session = D.load_session(paths[0])
print(f"session 0: {session.num_samples} samples x {session.num_channels} channels, "
      f"rate {session.sampling_rate_hz} Hz, subject {session.subject}")

print()
print("== windowing ==")
windows = D.load_windows(workdir, window_len=20, stride=20)
print("windows:", len(windows), " labels:", dict(Counter(w.label for w in windows)))

# majority labeling across a transition
mixed = D.EmgSession(
    subject=1, exercise=0, sampling_rate_hz=100.0,
    samples=np.zeros((6, 1), dtype=np.float32),
    labels=np.array([0, 0, 0, 7, 7, 7], dtype=np.uint16),
    repetitions=np.zeros(6, dtype=np.uint8),
)
majority = D.make_windows(mixed, window_len=4, stride=1)
dropped = D.make_windows(mixed, window_len=4, stride=1, transition_policy="drop")
print("labels [0,0,0,7,7,7], L=4, stride 1:")
print("  majority policy ->", [w.label for w in majority], "(tie goes to earliest sample)")
print("  drop policy     ->", len(dropped), "windows (every window mixes labels)")

print()
print("== window-level random split (fast, but leaks adjacent windows) ==")
split = D.split_windows(windows, D.RandomSplit(0.8, 0.1, 0.1), seed=1)
print("sizes train/val/test:", len(split.train), len(split.val), len(split.test))

print()
print("== repetition-wise split (leakage-controlled) ==")
split = D.split_windows(windows, D.RepetitionSplit(frozenset({2, 5, 7}),
                                                   frozenset({1})), seed=1)
reps = lambda idx: sorted({windows[i].repetition for i in idx})
print("train reps:", reps(split.train))
print("val reps:  ", reps(split.val))
print("test reps: ", reps(split.test))

print()
print("== normalization statistics (train split only) ==")
mu, sigma = D.fit_normalizer([windows[i] for i in split.train])
print("mu:   ", np.round(mu, 4))
print("sigma:", np.round(sigma, 4))
