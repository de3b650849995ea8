"""The 84-dimension window feature vector and min-max normalization.

Layout (indices into the vector):

* 0-59   ten time features per axis, axes in ``AXES`` order: mean, median,
  variance, mean inter-peak interval (s), range, mode, mean absolute
  deviation, IQR, skewness, kurtosis
* 60-65  accelerometer cov(x,y), cov(x,z), cov(y,z), corr(x,y), corr(x,z), corr(y,z)
* 66-71  the same six for the gyroscope
* 72-83  spectral entropy then spectral energy, per axis

All moments are population (1/n) moments.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyTemplateSet, LengthMismatch, SeriesTooShort
from .ingest import AXES, Window
from .preprocess import CleanWindow, FilterConfig, preprocess_window

N_FEATURES = 84
LAYOUT_VERSION = 1
MODE_BINS = 100

TIME_FEATURES = ("mean", "median", "variance", "peak_interval", "range", "mode",
                 "mad", "iqr", "skewness", "kurtosis")
PAIR_FEATURES = ("cov_xy", "cov_xz", "cov_yz", "corr_xy", "corr_xz", "corr_yz")


def _feature_names():
    names = [f"{axis}_{feat}" for axis in AXES for feat in TIME_FEATURES]
    names += [f"acc_{feat}" for feat in PAIR_FEATURES]
    names += [f"gyro_{feat}" for feat in PAIR_FEATURES]
    for axis in AXES:
        names += [f"{axis}_entropy", f"{axis}_energy"]
    return tuple(names)


FEATURE_NAMES = _feature_names()


@dataclass(frozen=True)
class PeakParams:
    min_separation: int = 10
    height_k: float = 1.0

    def __post_init__(self):
        if self.min_separation < 1:
            raise ValueError("min_separation must be >= 1")


def _local_maxima(x):
    # rising strictly into i, not rising out of it; endpoints never qualify
    return np.flatnonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:])) + 1


def detect_peaks(series, p: PeakParams = PeakParams()) -> np.ndarray:
    """Indices of keystroke-like peaks in ``series``.

    A peak is a local maximum at or above ``mean + height_k * std``. Peaks
    closer than ``min_separation`` frames conflict; the higher one wins and
    ties go to the lower index.
    """
    x = np.asarray(series, dtype=float)
    if x.shape[0] < 3:
        raise SeriesTooShort("peak detection needs at least 3 points")
    if np.ptp(x) == 0:
        return np.array([], dtype=int)
    cand = _local_maxima(x)
    cand = cand[x[cand] >= x.mean() + p.height_k * x.std()]
    if cand.size == 0 or p.min_separation == 1:
        return cand
    # stable sort on -height keeps lower indices first among equal heights
    order = cand[np.argsort(-x[cand], kind="stable")]
    blocked = np.zeros(x.shape[0], dtype=bool)
    kept = []
    reach = p.min_separation - 1
    for i in order:
        if blocked[i]:
            continue
        kept.append(i)
        blocked[max(0, i - reach):i + reach + 1] = True
    return np.array(sorted(kept), dtype=int)


def _mode_rows(x):
    lo = x.min(axis=1, keepdims=True)
    hi = x.max(axis=1, keepdims=True)
    span = hi - lo
    flat = span[:, 0] == 0
    safe = np.where(span == 0, 1.0, span)
    idx = np.floor((x - lo) / safe * MODE_BINS).astype(int)
    np.clip(idx, 0, MODE_BINS - 1, out=idx)
    counts = np.zeros((x.shape[0], MODE_BINS), dtype=int)
    rows = np.repeat(np.arange(x.shape[0]), x.shape[1])
    np.add.at(counts, (rows, idx.ravel()), 1)
    best = counts.argmax(axis=1)
    centers = lo[:, 0] + (best + 0.5) * span[:, 0] / MODE_BINS
    return np.where(flat, lo[:, 0], centers)


def _time_block(x, p, rate):
    """(k, L) array of series -> (k, 10) time features."""
    mean = x.mean(axis=1)
    dev = x - mean[:, None]
    m2 = (dev ** 2).mean(axis=1)
    m3 = (dev ** 3).mean(axis=1)
    m4 = (dev ** 4).mean(axis=1)
    flat = np.ptp(x, axis=1) == 0
    safe_m2 = np.where(flat, 1.0, m2)
    skew = np.where(flat, 0.0, m3 / safe_m2 ** 1.5)
    kurt = np.where(flat, 0.0, m4 / safe_m2 ** 2)
    var = np.where(flat, 0.0, m2)
    q1, med, q3 = np.percentile(x, [25, 50, 75], axis=1)
    intervals = np.zeros(x.shape[0])
    for r in range(x.shape[0]):
        peaks = detect_peaks(x[r], p)
        if peaks.size >= 2:
            intervals[r] = np.diff(peaks).mean() / rate
    return np.column_stack([
        mean, med, var, intervals, np.ptp(x, axis=1), _mode_rows(x),
        np.abs(dev).mean(axis=1), q3 - q1, skew, kurt,
    ])


def axis_time_features(series, p: PeakParams = PeakParams(), rate: float = 100.0) -> np.ndarray:
    """Ten time-domain features of one axis series (see module docstring)."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.shape[0] < 2:
        raise SeriesTooShort("time features need at least 2 points")
    if x.shape[0] == 2:
        return _short_time_features(x)
    return _time_block(x[None, :], p, rate)[0]


def _short_time_features(x):
    # length-2 series: no interior point can be a peak
    mean = x.mean()
    dev = x - mean
    m2 = (dev ** 2).mean()
    flat = x[0] == x[1]
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    return np.array([
        mean, med, 0.0 if flat else m2, 0.0, np.ptp(x), _mode_rows(x[None, :])[0],
        np.abs(dev).mean(), q3 - q1,
        0.0 if flat else (dev ** 3).mean() / m2 ** 1.5,
        0.0 if flat else (dev ** 4).mean() / m2 ** 2,
    ])


def _pair_block(x, y, z):
    series = np.vstack([x, y, z])
    dev = series - series.mean(axis=1, keepdims=True)
    flat = np.ptp(series, axis=1) == 0
    var = (dev ** 2).mean(axis=1)
    covs, corrs = [], []
    for i, j in ((0, 1), (0, 2), (1, 2)):
        if flat[i] or flat[j]:
            covs.append(0.0)
            corrs.append(0.0)
            continue
        c = (dev[i] * dev[j]).mean()
        covs.append(c)
        corrs.append(c / np.sqrt(var[i] * var[j]))
    return np.array(covs + corrs)


def pairwise_features(x, y, z) -> np.ndarray:
    """Covariances then correlations of the pairs (x,y), (x,z), (y,z).

    Correlation is 0 when either series is constant.
    """
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    if not (x.shape == y.shape == z.shape):
        raise LengthMismatch("pairwise features need equal-length series")
    if x.shape[0] < 2:
        raise SeriesTooShort("pairwise features need at least 2 points")
    return _pair_block(x, y, z)


def _freq_block(x):
    n = x.shape[1]
    power = np.abs(np.fft.fft(x, axis=1)) ** 2
    total = power.sum(axis=1)
    energy = total / n
    safe = np.where(total == 0, 1.0, total)
    prob = power / safe[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(prob > 0, prob * np.log2(prob), 0.0)
    entropy = np.where(total == 0, 0.0, -terms.sum(axis=1))
    # rounding can push a one-bin spectrum a hair below zero
    return np.maximum(entropy, 0.0), energy


def freq_features(series) -> tuple[float, float]:
    """(spectral entropy, spectral energy) over the full n-point DFT."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.shape[0] < 2:
        raise SeriesTooShort("frequency features need at least 2 points")
    entropy, energy = _freq_block(x[None, :])
    return float(entropy[0]), float(energy[0])


def extract_features(cw: CleanWindow, p: PeakParams = PeakParams()) -> np.ndarray:
    """The 84-value feature vector of a clean window."""
    s = cw.series
    if s.shape[1] < 3:
        time = np.vstack([_short_time_features(row) for row in s])
    else:
        time = _time_block(s, p, cw.sample_rate_hz)
    acc = _pair_block(s[0], s[1], s[2])
    gyro = _pair_block(s[3], s[4], s[5])
    entropy, energy = _freq_block(s)
    freq = np.column_stack([entropy, energy]).ravel()
    return np.concatenate([time.ravel(), acc, gyro, freq])


def window_features(w: Window, maf: int = 9, p: PeakParams = PeakParams()) -> np.ndarray:
    """Filter a raw window and extract its feature vector."""
    return extract_features(preprocess_window(w, FilterConfig(maf)), p)


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Per-feature [x_min, x_max] bounds taken from enrolled templates."""

    x_min: np.ndarray
    x_max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.x_min, dtype=float)
        hi = np.asarray(self.x_max, dtype=float)
        if lo.shape != hi.shape:
            raise LengthMismatch("bounds differ in length")
        if np.any(lo > hi):
            raise ValueError("x_min must not exceed x_max")
        object.__setattr__(self, "x_min", lo)
        object.__setattr__(self, "x_max", hi)

    def __eq__(self, other):
        if not isinstance(other, Normalizer):
            return NotImplemented
        return np.array_equal(self.x_min, other.x_min) and np.array_equal(self.x_max, other.x_max)

    def __call__(self, fv):
        return normalize(fv, self)


def fit_normalizer(templates) -> Normalizer:
    X = np.asarray(templates, dtype=float)
    if X.size == 0:
        raise EmptyTemplateSet("cannot fit bounds on zero templates")
    X = np.atleast_2d(X)
    return Normalizer(X.min(axis=0), X.max(axis=0))


def normalize(fv, nz: Normalizer) -> np.ndarray:
    """Clamp to the bounds and scale into [0, 1]; flat features map to 0.

    Works on a single vector or a stack of vectors (last axis = features).
    """
    x = np.asarray(fv, dtype=float)
    if x.shape[-1] != nz.x_min.shape[0]:
        raise LengthMismatch(f"vector has {x.shape[-1]} features, bounds have {nz.x_min.shape[0]}")
    span = nz.x_max - nz.x_min
    flat = span == 0
    clamped = np.clip(x, nz.x_min, nz.x_max)
    out = (clamped - nz.x_min) / np.where(flat, 1.0, span)
    return np.where(flat, 0.0, out)


@dataclass(eq=False)
class FeatureSet:
    """Feature vectors of many windows with their owners and time spans."""

    user_ids: np.ndarray
    start_ts: np.ndarray
    end_ts: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        self.user_ids = np.asarray(self.user_ids, dtype=object)
        self.start_ts = np.asarray(self.start_ts, dtype=float)
        self.end_ts = np.asarray(self.end_ts, dtype=float)
        self.X = np.asarray(self.X, dtype=float).reshape(len(self.user_ids), N_FEATURES)

    def __len__(self):
        return len(self.user_ids)

    @property
    def users(self) -> list[str]:
        """Distinct user ids in order of first appearance."""
        return list(dict.fromkeys(self.user_ids.tolist()))

    def subset(self, mask) -> "FeatureSet":
        mask = np.asarray(mask)
        return FeatureSet(self.user_ids[mask], self.start_ts[mask], self.end_ts[mask], self.X[mask])

    def of_user(self, user_id) -> "FeatureSet":
        return self.subset(self.user_ids == user_id)

    @classmethod
    def concat(cls, parts) -> "FeatureSet":
        parts = list(parts)
        if not parts:
            return cls(np.array([], dtype=object), [], [], np.zeros((0, N_FEATURES)))
        return cls(
            np.concatenate([p.user_ids for p in parts]),
            np.concatenate([p.start_ts for p in parts]),
            np.concatenate([p.end_ts for p in parts]),
            np.vstack([p.X for p in parts]),
        )

    @classmethod
    def from_windows(cls, windows, maf=9, p: PeakParams = PeakParams()) -> "FeatureSet":
        windows = list(windows)
        X = np.array([window_features(w, maf, p) for w in windows]).reshape(len(windows), N_FEATURES)
        return cls(
            np.array([w.user_id for w in windows], dtype=object),
            [w.start_ts for w in windows],
            [w.end_ts for w in windows],
            X,
        )


FEATURE_HEADER = ("user_id", "start_ts", "end_ts") + tuple(f"f{i}" for i in range(N_FEATURES))


def write_features(fs: FeatureSet, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FEATURE_HEADER)
        for uid, t0, t1, row in zip(fs.user_ids, fs.start_ts.tolist(), fs.end_ts.tolist(), fs.X.tolist()):
            writer.writerow([uid, repr(t0), repr(t1)] + [repr(v) for v in row])
    return path


def read_features(path) -> FeatureSet:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != FEATURE_HEADER:
            raise ValueError(f"{path}: not a feature file")
        uids, t0, t1, rows = [], [], [], []
        for rec in reader:
            if not rec:
                continue
            uids.append(rec[0])
            t0.append(float(rec[1]))
            t1.append(float(rec[2]))
            rows.append([float(v) for v in rec[3:]])
    return FeatureSet(np.array(uids, dtype=object), t0, t1, np.array(rows).reshape(len(rows), N_FEATURES))
