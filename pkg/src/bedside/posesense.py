"""Bed-leg load cells: synthetic traces, pose classifiers and get-up detection.

Channel order is head-left, head-right, foot-left, foot-right.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from . import config


class PoseClass(enum.Enum):
    Lying = "Lying"
    Sitting = "Sitting"
    SittingOneLegUp = "SittingOneLegUp"
    Reclining = "Reclining"
    SittingUp = "SittingUp"


RESTING = frozenset({PoseClass.Lying, PoseClass.Reclining})
UPRIGHT = frozenset({PoseClass.Sitting, PoseClass.SittingUp, PoseClass.SittingOneLegUp})

# Bed frame (80 lbf) plus a 160 lbf occupant, split across the legs. Invented
# values; every pair differs by at least 40 lbf on some channel.
NOMINAL_LBF = {
    PoseClass.Lying: (70.0, 70.0, 50.0, 50.0),
    PoseClass.Sitting: (40.0, 110.0, 20.0, 70.0),
    PoseClass.SittingOneLegUp: (30.0, 80.0, 70.0, 60.0),
    PoseClass.Reclining: (110.0, 100.0, 15.0, 15.0),
    PoseClass.SittingUp: (30.0, 30.0, 90.0, 90.0),
}


@dataclass(frozen=True)
class LoadSample:
    t: float
    f: tuple

    def __post_init__(self):
        f = tuple(min(max(float(v), 0.0), config.LOAD_CELL_MAX_LBF) for v in self.f)
        if len(f) != 4:
            raise ValueError("a load sample has exactly four channels")
        object.__setattr__(self, "f", f)


class EventKind(enum.Enum):
    GotUp = "GotUp"
    LayDown = "LayDown"


@dataclass(frozen=True)
class PoseEvent:
    kind: EventKind
    t: float


def generate_synthetic(pose, duration, rate=config.SENSOR_RATE_HZ, noise_sigma=8.0, seed=0, t0=0.0):
    if duration <= 0 or rate <= 0:
        raise ValueError("duration and rate must be positive")
    n = int(round(duration * rate))
    rng = np.random.default_rng(seed)
    base = np.array(NOMINAL_LBF[PoseClass(pose)])
    noise = rng.normal(0.0, noise_sigma, size=(n, 4)) if noise_sigma > 0 else np.zeros((n, 4))
    return [LoadSample(t0 + i / rate, tuple(base + noise[i])) for i in range(n)]


def _vec(sample):
    return np.asarray(sample.f if isinstance(sample, LoadSample) else sample, dtype=float)


@dataclass(frozen=True)
class GaussianModel:
    classes: tuple
    priors: np.ndarray  # (K,)
    means: np.ndarray  # (K, C)
    variances: np.ndarray  # (K, C)


def _group(labeled):
    groups = {}
    for sample, label in labeled:
        groups.setdefault(PoseClass(label), []).append(_vec(sample))
    return {k: np.array(v) for k, v in groups.items()}


def train_bayes(labeled, variance_floor=config.VARIANCE_FLOOR) -> GaussianModel:
    """Per-class, per-channel Gaussian fit; priors are class frequencies."""
    groups = _group(labeled)
    classes = tuple(c for c in PoseClass if c in groups)
    for c in classes:
        if len(groups[c]) < 2:
            raise ValueError(f"class {c.value} needs at least 2 samples, got {len(groups[c])}")
    counts = np.array([len(groups[c]) for c in classes], dtype=float)
    means = np.array([groups[c].mean(axis=0) for c in classes])
    variances = np.array([groups[c].var(axis=0, ddof=1) for c in classes])
    return GaussianModel(classes, counts / counts.sum(), means, np.maximum(variances, variance_floor))


def _pick(classes, scores):
    best = max(scores)
    return min((c for c, s in zip(classes, scores) if s == best), key=lambda c: c.value)


def classify_bayes(model: GaussianModel, sample):
    x = _vec(sample)
    var = model.variances
    loglik = -0.5 * (np.log(2 * math.pi * var) + (x - model.means) ** 2 / var).sum(axis=1)
    logpost = np.log(model.priors) + loglik
    post = np.exp(logpost - logpost.max())
    post /= post.sum()
    return _pick(model.classes, logpost.tolist()), post


def trapezoid(x, a, b, c, d) -> float:
    if x < a or x > d:
        return 0.0
    if b <= x <= c:
        return 1.0
    if x < b:
        return (x - a) / (b - a)
    return (d - x) / (d - c)


@dataclass(frozen=True)
class FuzzyModel:
    classes: tuple
    breakpoints: np.ndarray  # (K, C, 4)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.shape != (len(self.classes), bp.shape[1], 4):
            raise ValueError("breakpoints must have shape (classes, channels, 4)")
        if (np.diff(bp, axis=2) < 0).any():
            raise ValueError("trapezoid breakpoints must be nondecreasing")
        object.__setattr__(self, "breakpoints", bp)


def train_fuzzy(labeled, plateau_k=1.0, support_k=3.0, variance_floor=config.VARIANCE_FLOOR) -> FuzzyModel:
    """Trapezoids centred on each class mean: plateau of +-plateau_k std, support of +-support_k std."""
    g = train_bayes(labeled, variance_floor)
    sd = np.sqrt(g.variances)
    m = g.means
    bp = np.stack([m - support_k * sd, m - plateau_k * sd, m + plateau_k * sd, m + support_k * sd], axis=-1)
    return FuzzyModel(g.classes, bp)


def classify_fuzzy(model: FuzzyModel, sample):
    """Returns ``(class, memberships)``; class is None when no membership is positive."""
    x = _vec(sample)
    mu = np.array(
        [min(trapezoid(x[ch], *model.breakpoints[k, ch]) for ch in range(len(x))) for k in range(len(model.classes))]
    )
    if not (mu > 0).any():
        return None, mu
    return _pick(model.classes, mu.tolist()), mu


class TransitionDetector:
    """Debounced resting/upright tracker.

    A group (resting or upright) becomes settled after ``debounce_n``
    consecutive samples. Switching from a settled resting run to a settled
    upright run emits GotUp; the reverse emits LayDown.
    """

    def __init__(self, debounce_n=config.DEBOUNCE_N):
        if debounce_n < 1:
            raise ValueError("debounce_n must be at least 1")
        self.debounce_n = debounce_n
        self.settled = None
        self._candidate = None
        self._count = 0

    def update(self, pose, t):
        group = None
        if pose in RESTING:
            group = "resting"
        elif pose in UPRIGHT:
            group = "upright"
        if group is None or group == self.settled:
            self._candidate, self._count = None, 0
            return None
        if group != self._candidate:
            self._candidate, self._count = group, 0
        self._count += 1
        if self._count < self.debounce_n:
            return None
        previous, self.settled = self.settled, group
        self._candidate, self._count = None, 0
        if previous is None:
            return None
        return PoseEvent(EventKind.GotUp if group == "upright" else EventKind.LayDown, t)


def detect_transition(class_stream, debounce_n=config.DEBOUNCE_N, times=None):
    det = TransitionDetector(debounce_n)
    events = []
    for i, pose in enumerate(class_stream):
        ev = det.update(pose, float(i) if times is None else times[i])
        if ev is not None:
            events.append(ev)
    return events


def benchmark_accuracy(model_kind="bayes", noise_sigma=8.0, train_seed=11, test_seed=12, duration=15.0):
    """Per-sample accuracy on the synthetic benchmark: 5 poses x 150 samples each."""
    train, test = [], []
    for k, pose in enumerate(PoseClass):
        train += [(s, pose) for s in generate_synthetic(pose, duration, noise_sigma=noise_sigma, seed=[train_seed, k])]
        test += [(s, pose) for s in generate_synthetic(pose, duration, noise_sigma=noise_sigma, seed=[test_seed, k])]
    if model_kind == "bayes":
        model, classify = train_bayes(train), classify_bayes
    else:
        model, classify = train_fuzzy(train), classify_fuzzy
    hits = sum(classify(model, s)[0] == label for s, label in test)
    return hits / len(test)


CSV_FIELDS = ("t", "f1", "f2", "f3", "f4")


def write_csv(samples, labels=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS + (("label",) if labels is not None else ()))
    for i, s in enumerate(samples):
        row = [repr(s.t)] + [repr(v) for v in s.f]
        if labels is not None:
            row.append(PoseClass(labels[i]).value)
        w.writerow(row)
    return buf.getvalue()


def read_csv(text):
    """Parse ``t,f1,f2,f3,f4[,label]``; returns (samples, labels or None)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty CSV")
    header = tuple(h.strip() for h in rows[0])
    if header not in (CSV_FIELDS, CSV_FIELDS + ("label",)):
        raise ValueError(f"bad CSV header {','.join(header)!r}; expected t,f1,f2,f3,f4[,label]")
    labeled = len(header) == 6
    samples, labels = [], []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"line {n}: expected {len(header)} fields, got {len(row)}")
        try:
            t, *f = (float(v) for v in row[:5])
        except ValueError:
            raise ValueError(f"line {n}: non-numeric field") from None
        samples.append(LoadSample(t, tuple(f)))
        if labeled:
            try:
                labels.append(PoseClass(row[5].strip()))
            except ValueError:
                raise ValueError(f"line {n}: unknown pose label {row[5]!r}") from None
    return samples, (labels if labeled else None)
