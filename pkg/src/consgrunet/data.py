"""Session files, windowing, leakage-controlled splits, synthetic data.

Sessions live in the little-endian "ESF1" container: magic, version byte,
channel count, subject, exercise, sampling rate, the [T x C] float32 sample
matrix (channel fastest), per-sample class labels (u16) and repetition
indices (u8), and a trailing CRC32 over everything after the magic.

A window-level random split leaks temporally adjacent (nearly identical)
samples between train and test; repetition-wise splitting avoids that and is
the honest protocol for accuracy claims. Both are provided.
"""

from __future__ import annotations

import struct
import warnings
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, IntegrityError, LabelError
from .tensor import Tensor

MAGIC = b"ESF1"
VERSION = 1
NUM_CLASSES = 53
MAX_REPETITION = 10

# Movement names, index 0 = rest. Commas are replaced by ';' so the names
# can be written to CSV unquoted.
LABEL_NAMES = (
    "Rest",
    "Index flexion",
    "Index extension",
    "Middle flexion",
    "Middle extension",
    "Ring flexion",
    "Ring extension",
    "Little finger flexion",
    "Little finger extension",
    "Thumb adduction",
    "Thumb abduction",
    "Thumb flexion",
    "Thumb extension",
    "Thumb up",
    "Extension of index and middle; flexion of the others",
    "Flexion of ring and little finger; extension of the others",
    "Thumb opposing base of little finger",
    "Abduction of all fingers",
    "Fingers flexed together in fist",
    "Pointing index",
    "Adduction of extended fingers",
    "Wrist supination (axis: middle finger)",
    "Wrist pronation (axis: middle finger)",
    "Wrist supination (axis: little finger)",
    "Wrist pronation (axis: little finger)",
    "Wrist flexion",
    "Wrist extension",
    "Wrist radial deviation",
    "Wrist ulnar deviation",
    "Wrist extension with closed hand",
    "Large diameter grasp",
    "Small diameter grasp (power grip)",
    "Fixed hook grasp",
    "Index finger extension grasp",
    "Medium wrap",
    "Ring grasp",
    "Prismatic four fingers grasp",
    "Stick grasp",
    "Writing tripod grasp",
    "Power sphere grasp",
    "Three finger sphere grasp",
    "Precision sphere grasp",
    "Tripod grasp",
    "Prismatic pinch grasp",
    "Tip pinch grasp",
    "Quadpod grasp",
    "Lateral grasp",
    "Parallel extension grasp",
    "Extension type grasp",
    "Power disk grasp",
    "Open a bottle with a tripod grasp",
    "Turn a screw (grasp the screwdriver with a stick grasp)",
    "Cut something (grasp the knife with an index finger extension grasp)",
)

assert len(LABEL_NAMES) == NUM_CLASSES


def class_names_for(num_classes: int) -> list[str]:
    """Movement names when the full 53-class space is used, else generic ids."""
    if num_classes == NUM_CLASSES:
        return list(LABEL_NAMES)
    return [f"class_{k}" for k in range(num_classes)]


@dataclass
class EmgSession:
    subject: int
    exercise: int
    sampling_rate_hz: float
    samples: np.ndarray  # [T, C] float32
    labels: np.ndarray  # [T] uint16, values in [0, 53)
    repetitions: np.ndarray  # [T] uint8, values in [0, 10]

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint16)
        self.repetitions = np.ascontiguousarray(self.repetitions, dtype=np.uint8)
        t, c = self.samples.shape
        if c < 1:
            raise FormatError("session needs at least one channel")
        if self.labels.shape != (t,) or self.repetitions.shape != (t,):
            raise FormatError("labels and repetitions must have one entry per sample")
        if self.sampling_rate_hz <= 0:
            raise FormatError(f"sampling rate must be > 0, got {self.sampling_rate_hz}")
        if self.labels.size and int(self.labels.max()) >= NUM_CLASSES:
            raise LabelError(
                f"label {int(self.labels.max())} outside [0, {NUM_CLASSES})"
            )
        if self.repetitions.size and int(self.repetitions.max()) > MAX_REPETITION:
            raise FormatError(
                f"repetition {int(self.repetitions.max())} outside [0, {MAX_REPETITION}]"
            )

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def num_channels(self) -> int:
        return self.samples.shape[1]


@dataclass
class Window:
    values: Tensor  # [L, C]
    label: int
    subject: int
    repetition: int
    offset: int


@dataclass
class DatasetSplit:
    train: list
    val: list
    test: list
    mode: str
    seed: int

    def partitions(self) -> dict:
        return {"train": self.train, "val": self.val, "test": self.test}


@dataclass(frozen=True)
class RandomSplit:
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1


@dataclass(frozen=True)
class RepetitionSplit:
    test_reps: frozenset = frozenset({2, 5, 7})
    val_reps: frozenset = frozenset({1})


# ---------------------------------------------------------------------------
# ESF1 I/O
# ---------------------------------------------------------------------------

def write_session(session: EmgSession, path):
    t, c = session.samples.shape
    if c > 255:
        raise FormatError("ESF1 stores at most 255 channels")
    body = struct.pack(
        "<BBHBfI",
        VERSION,
        c,
        session.subject,
        session.exercise,
        float(np.float32(session.sampling_rate_hz)),
        t,
    )
    body += np.ascontiguousarray(session.samples, dtype="<f4").tobytes()
    body += np.ascontiguousarray(session.labels, dtype="<u2").tobytes()
    body += np.ascontiguousarray(session.repetitions, dtype="u1").tobytes()
    crc = zlib.crc32(body) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(body)
        fh.write(struct.pack("<I", crc))


def load_session(path) -> EmgSession:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("not an ESF1 session file (bad magic)", offset=0)
    header_end = 4 + struct.calcsize("<BBHBfI")
    if len(data) < header_end + 4:
        raise IntegrityError("session file truncated", offset=len(data))
    version, channels, subject, exercise, rate, t = struct.unpack_from(
        "<BBHBfI", data, 4
    )
    if version != VERSION:
        raise FormatError(f"unsupported session version {version}", offset=4)
    payload = 4 * t * channels + 2 * t + t
    expected_len = header_end + payload + 4
    if len(data) != expected_len:
        raise IntegrityError(
            f"session file is {len(data)} bytes, expected {expected_len}",
            offset=min(len(data), expected_len),
        )
    stored_crc = struct.unpack_from("<I", data, len(data) - 4)[0]
    actual_crc = zlib.crc32(data[4 : len(data) - 4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise IntegrityError(
            f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}",
            offset=len(data) - 4,
        )
    pos = header_end
    samples = np.frombuffer(data, dtype="<f4", count=t * channels, offset=pos)
    pos += 4 * t * channels
    labels = np.frombuffer(data, dtype="<u2", count=t, offset=pos)
    pos += 2 * t
    reps = np.frombuffer(data, dtype="u1", count=t, offset=pos)
    return EmgSession(
        subject=subject,
        exercise=exercise,
        sampling_rate_hz=rate,
        samples=samples.reshape(t, channels).astype(np.float32),
        labels=labels.astype(np.uint16),
        repetitions=reps.astype(np.uint8),
    )


def list_sessions(directory) -> list:
    paths = sorted(Path(directory).glob("*.esf"))
    if not paths:
        raise FormatError(f"no .esf session files in {directory}")
    return paths


# ---------------------------------------------------------------------------
# windowing
# ---------------------------------------------------------------------------

def _majority_earliest(values: np.ndarray) -> int:
    """Most frequent value; ties resolve to the earliest sample's value."""
    counts = np.bincount(values)
    top = counts.max()
    tied = np.flatnonzero(counts == top)
    if len(tied) == 1:
        return int(tied[0])
    tied_set = set(int(v) for v in tied)
    for v in values:
        if int(v) in tied_set:
            return int(v)
    raise AssertionError("unreachable")


def make_windows(session: EmgSession, window_len: int, stride: int,
                 transition_policy: str = "majority") -> list:
    """Cut labeled windows at offsets 0, stride, 2*stride, ...

    Under `majority`, a window's label is the most frequent per-sample label
    (tie resolves to the earliest sample's label). Under `drop`, windows
    containing more than one distinct label are discarded.
    """
    if transition_policy not in ("majority", "drop"):
        raise ConfigError(f"unknown transition policy {transition_policy!r}")
    if window_len < 1 or stride < 1:
        raise ConfigError("window_len and stride must be >= 1")
    t = session.num_samples
    if window_len > t:
        warnings.warn(
            f"window_len {window_len} exceeds session length {t}; no windows",
            stacklevel=2,
        )
        return []
    windows = []
    for offset in range(0, t - window_len + 1, stride):
        label_slice = session.labels[offset : offset + window_len]
        if transition_policy == "drop" and len(np.unique(label_slice)) > 1:
            continue
        label = _majority_earliest(label_slice)
        repetition = _majority_earliest(
            session.repetitions[offset : offset + window_len]
        )
        windows.append(
            Window(
                values=Tensor(session.samples[offset : offset + window_len]),
                label=label,
                subject=session.subject,
                repetition=repetition,
                offset=offset,
            )
        )
    return windows


def load_windows(directory, window_len: int, stride: int,
                 transition_policy: str = "majority") -> list:
    """All windows from every .esf file in a directory, in (file, offset) order."""
    windows = []
    for path in list_sessions(directory):
        session = load_session(path)
        windows.extend(make_windows(session, window_len, stride, transition_policy))
    return windows


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

def split_windows(windows, mode, seed: int = 0) -> DatasetSplit:
    n = len(windows)
    if isinstance(mode, RandomSplit):
        total = mode.train + mode.val + mode.test
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"split fractions sum to {total}, expected 1")
        if min(mode.train, mode.val, mode.test) < 0:
            raise ConfigError("split fractions must be non-negative")
        order = np.random.default_rng(seed).permutation(n)
        cut1 = int(np.floor(n * mode.train))
        cut2 = int(np.floor(n * (mode.train + mode.val)))
        return DatasetSplit(
            train=[int(i) for i in order[:cut1]],
            val=[int(i) for i in order[cut1:cut2]],
            test=[int(i) for i in order[cut2:]],
            mode="random",
            seed=seed,
        )
    if isinstance(mode, RepetitionSplit):
        test_reps = frozenset(mode.test_reps)
        val_reps = frozenset(mode.val_reps)
        if test_reps & val_reps:
            raise ConfigError(
                f"test and val repetition sets overlap: {sorted(test_reps & val_reps)}"
            )
        train, val, test = [], [], []
        for i, w in enumerate(windows):
            if w.repetition in test_reps:
                test.append(i)
            elif w.repetition in val_reps:
                val.append(i)
            else:
                train.append(i)
        return DatasetSplit(train=train, val=val, test=test,
                            mode="by_repetition", seed=seed)
    raise ConfigError(f"unknown split mode {mode!r}")


def fit_normalizer(train_windows) -> tuple:
    """Per-channel (mu, sigma) over the training samples; sigma floored at 1e-6."""
    if not train_windows:
        raise ConfigError("cannot fit a normalizer on an empty training split")
    stacked = np.concatenate(
        [w.values.array for w in train_windows], axis=0
    ).astype(np.float64)
    mu = stacked.mean(axis=0)
    sigma = np.maximum(stacked.std(axis=0), 1e-6)
    return mu.astype(np.float32), sigma.astype(np.float32)


# ---------------------------------------------------------------------------
# synthetic sessions
# ---------------------------------------------------------------------------

def make_synthetic(out_dir, num_classes: int, channels: int, window_len: int,
                   windows_per_class: int, noise_sd: float, seed: int) -> list:
    """Write one ESF1 session per class and return the file paths.

    Class k emits a bank of sinusoids whose cycle count, phase, and amplitude
    are keyed to (k, channel), with an integer number of cycles per window so
    that consecutive windows of a class are sample-identical when noise_sd is
    zero. Repetition indices cycle 0..9 per window.
    """
    if not 2 <= num_classes <= NUM_CLASSES:
        raise ConfigError(f"num_classes must be in [2, {NUM_CLASSES}]")
    if channels < 1 or window_len < 2 or windows_per_class < 1:
        raise ConfigError("need channels >= 1, window_len >= 2, windows_per_class >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    max_cycles = max(1, window_len // 2 - 1)
    paths = []
    for k in range(num_classes):
        t_total = windows_per_class * window_len
        t_in_window = np.arange(t_total) % window_len
        signal = np.empty((t_total, channels), dtype=np.float64)
        for c in range(channels):
            cycles = 1 + (k * 7 + c * 3) % max_cycles
            phase = 2.0 * np.pi * ((k * 5 + c * 11) % 16) / 16.0
            amp = 0.75 + 0.25 * ((k + 2 * c) % 3)
            signal[:, c] = amp * np.sin(
                2.0 * np.pi * cycles * t_in_window / window_len + phase
            )
        if noise_sd > 0:
            rng = np.random.default_rng([seed, k])
            signal = signal + rng.normal(0.0, noise_sd, size=signal.shape)
        reps = ((np.arange(t_total) // window_len) % 10).astype(np.uint8)
        session = EmgSession(
            subject=1,
            exercise=k,
            sampling_rate_hz=100.0,
            samples=signal.astype(np.float32),
            labels=np.full(t_total, k, dtype=np.uint16),
            repetitions=reps,
        )
        path = out_dir / f"synth_c{k:02d}.esf"
        write_session(session, path)
        paths.append(path)
    return paths
