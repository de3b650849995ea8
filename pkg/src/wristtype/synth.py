"""Seeded synthetic typing-motion generator.

Each simulated user types with a gamma renewal process of keystrokes. Every
keystroke shows up as a Gaussian pulse on z_a whose height models how hard
the key is hit and whose width models how long it is held. x_a and y_a are
scaled, time-jittered copies of the pulse train. The gyroscope axes are
copies with their own jitter and per-user gains. White noise is added on
top. Users differ only through their ``SyntheticUserSpec``, drawn from
population distributions whose spread is scaled by ``separation``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import BadDuration, IndexOutOfRange
from .ingest import DEFAULT_RATE_HZ, Recording, write_recording

# pulse timing jitter of the x/y and gyro copies, seconds
JITTER_S = 0.008
# per-keystroke amplitude wobble of the copies, relative
COPY_WOBBLE = 0.1


@dataclass(frozen=True)
class SyntheticUserSpec:
    key_rate_hz: float = 3.5
    rate_cv: float = 0.4
    press_amp_mean: float = 2.0
    press_amp_std: float = 0.5
    peak_width_ms: float = 120.0
    xy_coupling: tuple = (0.6, 0.4)
    gyro_gain: tuple = (0.25, 0.2, 0.15)
    noise_std_acc: float = 0.08
    noise_std_gyro: float = 0.03
    seed_user: int = 0

    def __post_init__(self):
        positive = (self.key_rate_hz, self.press_amp_mean, self.press_amp_std, self.peak_width_ms,
                    *self.xy_coupling, *self.gyro_gain)
        if min(positive) <= 0:
            raise ValueError("rates, amplitudes, couplings and widths must be positive")
        if self.noise_std_acc < 0 or self.noise_std_gyro < 0:
            raise ValueError("noise levels must be non-negative")
        if not 0 < self.rate_cv < 1:
            raise ValueError("rate_cv must lie in (0, 1)")
        if len(self.xy_coupling) != 2 or len(self.gyro_gain) != 3:
            raise ValueError("xy_coupling needs 2 values and gyro_gain 3")

    def as_vector(self) -> np.ndarray:
        """All real-valued parameters, flattened (seed excluded)."""
        return np.array([
            self.key_rate_hz, self.rate_cv, self.press_amp_mean, self.press_amp_std,
            self.peak_width_ms, *self.xy_coupling, *self.gyro_gain,
            self.noise_std_acc, self.noise_std_gyro,
        ])


@dataclass(frozen=True)
class PopulationSpec:
    n_users: int = 30
    separation: float = 1.0
    duration_s: float = 240.0
    sample_rate_hz: float = DEFAULT_RATE_HZ
    seed: int = 42

    def __post_init__(self):
        if self.n_users < 2:
            raise ValueError("a population needs at least 2 users")
        if self.duration_s <= 0:
            raise BadDuration("duration_s must be positive")
        if self.separation < 0:
            raise ValueError("separation must be >= 0")


# (base value, log-scale spread) for multiplicative parameters
_LOG_PARAMS = {
    "key_rate_hz": (3.5, 0.40),
    "press_amp_mean": (2.0, 0.70),
    "peak_width_ms": (120.0, 0.60),
    "noise_std_acc": (0.08, 0.60),
    "noise_std_gyro": (0.03, 0.60),
}
_AMP_CV = (0.25, 0.60)
_RATE_CV = (0.40, 0.24)
_XY = ((0.6, 0.4), 0.70)
_GYRO = ((0.25, 0.2, 0.15), 0.70)


def user_id_for(index: int) -> str:
    return f"u{index:02d}"


def sample_user_spec(pop: PopulationSpec, user_index: int) -> SyntheticUserSpec:
    """Parameters of user ``user_index``; a pure function of (pop, index)."""
    if not 0 <= user_index < pop.n_users:
        raise IndexOutOfRange(f"user index {user_index} outside [0, {pop.n_users})")
    rng = np.random.default_rng([pop.seed, user_index])
    s = pop.separation
    # bounded unit-variance draws: no outlier users stretching the feature ranges;
    # fixed draw order so every parameter keeps its own stream position
    z = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), 12)
    vals = {name: base * np.exp(s * spread * z[k])
            for k, (name, (base, spread)) in enumerate(_LOG_PARAMS.items())}
    vals["key_rate_hz"] = float(np.clip(vals["key_rate_hz"], 0.5, 20.0))
    amp_cv = _AMP_CV[0] * np.exp(s * _AMP_CV[1] * z[5])
    rate_cv = float(np.clip(_RATE_CV[0] + s * _RATE_CV[1] * z[6], 0.05, 0.95))
    xy = tuple(float(b * np.exp(s * _XY[1] * z[7 + k])) for k, b in enumerate(_XY[0]))
    gyro = tuple(float(b * np.exp(s * _GYRO[1] * z[9 + k])) for k, b in enumerate(_GYRO[0]))
    seed_user = int(np.random.SeedSequence([pop.seed, user_index]).generate_state(1)[0])
    return SyntheticUserSpec(
        key_rate_hz=vals["key_rate_hz"],
        rate_cv=rate_cv,
        press_amp_mean=float(vals["press_amp_mean"]),
        press_amp_std=float(vals["press_amp_mean"] * amp_cv),
        peak_width_ms=float(vals["peak_width_ms"]),
        xy_coupling=xy,
        gyro_gain=gyro,
        noise_std_acc=float(vals["noise_std_acc"]),
        noise_std_gyro=float(vals["noise_std_gyro"]),
        seed_user=seed_user,
    )


def interpolate_specs(a: SyntheticUserSpec, b: SyntheticUserSpec, alpha: float) -> SyntheticUserSpec:
    """Parameterwise (1 - alpha) * a + alpha * b; the seed is taken from ``a``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    mixed = {}
    for f in fields(SyntheticUserSpec):
        if f.name == "seed_user":
            continue
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if isinstance(va, tuple):
            mixed[f.name] = tuple((1 - alpha) * x + alpha * y for x, y in zip(va, vb))
        else:
            mixed[f.name] = (1 - alpha) * va + alpha * vb
    return replace(a, **mixed)


def _keystroke_times(spec, duration_s, rng):
    mean = 1.0 / spec.key_rate_hz
    shape = 1.0 / spec.rate_cv ** 2
    n_max = int(duration_s / mean * 3) + 10
    gaps = rng.gamma(shape, mean / shape, size=n_max)
    times = rng.uniform(0, mean) + np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    return times[times < duration_s]


def _positive_normal(rng, mean, std, size):
    out = rng.normal(mean, std, size)
    bad = out <= 0
    while bad.any():
        out[bad] = rng.normal(mean, std, int(bad.sum()))
        bad = out <= 0
    return out


def _pulse_train(n, rate, times_s, amps, sigma_s):
    out = np.zeros(n)
    half = int(np.ceil(4 * sigma_s * rate)) + 1
    for t0, a in zip(times_s, amps):
        c = int(round(t0 * rate))
        lo, hi = max(0, c - half), min(n, c + half + 1)
        if lo >= hi:
            continue
        idx = np.arange(lo, hi)
        out[lo:hi] += a * np.exp(-0.5 * ((idx / rate - t0) / sigma_s) ** 2)
    return out


def generate_recording(spec: SyntheticUserSpec, duration_s: float = 240.0,
                       rate_hz: float = DEFAULT_RATE_HZ, session_seed: int = 0,
                       user_id: str = "synthetic", event_times_s=None) -> Recording:
    """Simulate one typing session.

    ``event_times_s`` replaces the random keystroke process with fixed
    keystroke times (used to build test signals).
    """
    if duration_s < 1:
        raise BadDuration("duration_s must be >= 1")
    if rate_hz < 10:
        raise BadDuration("rate_hz must be >= 10")
    rng = np.random.default_rng([spec.seed_user, session_seed])
    n = int(round(duration_s * rate_hz))
    times = (_keystroke_times(spec, duration_s, rng) if event_times_s is None
             else np.asarray(event_times_s, dtype=float))
    k = times.size
    amps = _positive_normal(rng, spec.press_amp_mean, spec.press_amp_std, k)
    # peak_width_ms is the full width at half maximum
    sigma = spec.peak_width_ms / 1000.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))

    def copy(gain):
        jitter = rng.normal(0.0, JITTER_S, k)
        wobble = 1.0 + COPY_WOBBLE * rng.standard_normal(k)
        return _pulse_train(n, rate_hz, times + jitter, gain * amps * wobble, sigma)

    z_a = _pulse_train(n, rate_hz, times, amps, sigma)
    x_a = copy(spec.xy_coupling[0])
    y_a = copy(spec.xy_coupling[1])
    gyro = [copy(g) for g in spec.gyro_gain]
    acc = np.vstack([x_a, y_a, z_a]) + rng.normal(0.0, spec.noise_std_acc, (3, n))
    gyr = np.vstack(gyro) + rng.normal(0.0, spec.noise_std_gyro, (3, n))
    t = np.arange(n) * (1000.0 / rate_hz)
    data = np.column_stack([t, acc.T, t, gyr.T])
    return Recording(user_id, float(rate_hz), data)


def session_seed_for(pop: PopulationSpec, user_index: int, session: int) -> int:
    return int(np.random.SeedSequence([pop.seed, user_index, session, 1]).generate_state(1)[0])


def generate_population(pop: PopulationSpec, sessions_per_user: int = 1, out_dir=None):
    """All (user, session) recordings of a population.

    With ``out_dir`` set, each recording is also written as a CSV file and a
    ``manifest.csv`` (user_id, session, path, seed) lists them.
    Returns a list of (user_id, session, seed, Recording).
    """
    if sessions_per_user < 1:
        raise ValueError("sessions_per_user must be >= 1")
    out = []
    for u in range(pop.n_users):
        spec = sample_user_spec(pop, u)
        uid = user_id_for(u)
        for s in range(sessions_per_user):
            seed = session_seed_for(pop, u, s)
            rec = generate_recording(spec, pop.duration_s, pop.sample_rate_hz, seed, user_id=uid)
            out.append((uid, s, seed, rec))
    if out_dir is not None:
        write_population(out, out_dir)
        write_population_spec(pop, Path(out_dir) / POPULATION_FILE)
    return out


POPULATION_FILE = "population.json"


def write_population_spec(pop: PopulationSpec, path) -> Path:
    """Store the spec next to a manifest so user specs can be regenerated."""
    path = Path(path)
    path.write_text(json.dumps(pop.__dict__, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def read_population_spec(path) -> PopulationSpec:
    return PopulationSpec(**json.loads(Path(path).read_text(encoding="utf-8")))


def write_population(items, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user_id", "session", "path", "seed"])
        for uid, s, seed, rec in items:
            name = f"{uid}_s{s}.csv"
            write_recording(rec, out_dir / name)
            writer.writerow([uid, s, name, seed])
    return manifest


def read_manifest(path):
    """Rows of a manifest as (user_id, session, absolute path, seed)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        return [(r["user_id"], int(r["session"]), path.parent / r["path"], int(r["seed"]))
                for r in csv.DictReader(fh)]
