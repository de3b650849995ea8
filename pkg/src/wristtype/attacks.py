"""Adversarial evaluation against a victim's enrolled samples.

Every adversary is measured against the victim's zero-effort EER
threshold. Natural and forged impostors are scored pairwise against each of
the victim's samples; an imitator window is scored against the victim's
samples as a whole, the way the verifier scores a query.

* zero effort: the other users' natural samples
* statistical: forged vectors whose features are drawn from the most
  populated histogram bins of the other users' samples
* imitation: recordings from a generator whose parameters are moved a
  fraction ``fidelity`` of the way from the attacker towards the victim
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .decision import MetricSpec, eer, sweep_scores, user_scores
from .features import FeatureSet, PeakParams
from .ingest import chunk
from .synth import SyntheticUserSpec, generate_recording, interpolate_specs

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttackConfig:
    out_number: int = 100
    bin_number: int = 50
    top_bins: int = 5
    seed: int = 3
    include_victim: bool = False

    def __post_init__(self):
        if self.out_number < 1 or self.bin_number < 1:
            raise ValueError("out_number and bin_number must be positive")
        if not 1 <= self.top_bins <= self.bin_number:
            raise ValueError("top_bins must lie in [1, bin_number]")

    @classmethod
    def for_bins(cls, bin_number, **kw) -> "AttackConfig":
        """Attacker strength preset: keep the top tenth of the bins."""
        return cls(bin_number=bin_number, top_bins=max(1, math.ceil(bin_number / 10)), **kw)


@dataclass(frozen=True)
class ImitationSpec:
    victim_spec: SyntheticUserSpec
    attacker_spec: SyntheticUserSpec
    fidelity: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.fidelity <= 1.0:
            raise ValueError("fidelity must lie in [0, 1]")

    def mixed_spec(self) -> SyntheticUserSpec:
        return interpolate_specs(self.attacker_spec, self.victim_spec, self.fidelity)


@dataclass
class AttackResult:
    victim: str
    baseline_eer: float
    threshold: float
    accept_rate: float
    new_eer: float = float("nan")
    forged_only_eer: float = float("nan")
    config: str = ""
    degenerate_features: list = field(default_factory=list)


def zero_effort_baseline(fs: FeatureSet, victim, metric: MetricSpec = MetricSpec(),
                         bounds: str = "population", D=None):
    """(eer, threshold) of the victim against every other user's samples."""
    genuine, impostor, _ = user_scores(fs.X, fs.user_ids, victim, metric, bounds=bounds, D=D)
    return eer(*sweep_scores(genuine, impostor))


def com_gen(n_features: int, out_number: int, top_bins: int, seed: int = 0) -> np.ndarray:
    """Random bin choices in 1..top_bins, one row per forged sample.

    Rows are redrawn until distinct whenever enough distinct rows exist.
    """
    if min(n_features, out_number, top_bins) < 1:
        raise ValueError("arguments must be positive")
    rng = np.random.default_rng(seed)
    combin = rng.integers(1, top_bins + 1, size=(out_number, n_features))
    if top_bins == 1 or n_features * math.log(top_bins) <= math.log(out_number):
        return combin
    while True:
        _, first = np.unique(combin, axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(out_number), first)
        if dup.size == 0:
            return combin
        combin[dup] = rng.integers(1, top_bins + 1, size=(dup.size, n_features))


def top_bin_intervals(pool, bin_number: int, top_bins: int):
    """Per feature, the [lower, upper) edges of the most populated bins.

    Bins are ranked by count, ties going to the lower edge. Returns a list
    (one entry per feature) of (top_bins, 2) arrays, or None for a feature
    whose pool values are all equal.
    """
    pool = np.asarray(pool, dtype=float)
    out = []
    for j in range(pool.shape[1]):
        col = pool[:, j]
        if np.ptp(col) == 0:
            out.append(None)
            continue
        counts, edges = np.histogram(col, bins=bin_number, range=(col.min(), col.max()))
        order = np.argsort(-counts, kind="stable")[:top_bins]
        out.append(np.column_stack([edges[order], edges[order + 1]]))
    return out


def forge_samples(pool, cfg: AttackConfig):
    """Forged feature vectors built from the pool's top histogram bins.

    Returns (forged, degenerate) where ``degenerate`` lists the features with
    a zero-width pool range; those features are forged as the constant.
    """
    pool = np.asarray(pool, dtype=float)
    n_features = pool.shape[1]
    combin = com_gen(n_features, cfg.out_number, cfg.top_bins, cfg.seed)
    intervals = top_bin_intervals(pool, cfg.bin_number, cfg.top_bins)
    rng = np.random.default_rng([cfg.seed, 1])
    u = rng.random((cfg.out_number, n_features))
    forged = np.empty((cfg.out_number, n_features))
    degenerate = []
    for j, iv in enumerate(intervals):
        if iv is None:
            forged[:, j] = pool[0, j]
            degenerate.append(j)
            continue
        lo, hi = iv[combin[:, j] - 1].T
        forged[:, j] = lo + u[:, j] * (hi - lo)
    if degenerate:
        log.warning("features with a zero-width pool range forged as constants: %s", degenerate)
    return forged, degenerate


def statistical_attack(fs: FeatureSet, victim, cfg: AttackConfig = AttackConfig(),
                       metric: MetricSpec = MetricSpec(), bounds: str = "population",
                       D=None) -> AttackResult:
    """Forge ``cfg.out_number`` vectors from the other users and attack ``victim``.

    ``new_eer`` is the victim's EER with forged and natural impostors pooled;
    ``forged_only_eer`` uses the forged attempts alone.
    """
    others = fs.user_ids != victim
    if len(set(fs.user_ids[others].tolist())) < 2:
        raise ValueError("the attacker pool needs at least two users besides the victim")
    # diagnostic mode only: lets the forger see the victim's own samples
    pool = fs.X if cfg.include_victim else fs.X[others]
    forged, degenerate = forge_samples(pool, cfg)
    genuine, impostor, extra = user_scores(fs.X, fs.user_ids, victim, metric, extra_impostors=forged,
                                           bounds=bounds, D=D)
    base, tau = eer(*sweep_scores(genuine, impostor))
    pooled, _ = eer(*sweep_scores(genuine, np.concatenate([impostor, extra])))
    forged_only, _ = eer(*sweep_scores(genuine, extra))
    label = f"bins={cfg.bin_number};top={cfg.top_bins};forged={cfg.out_number};seed={cfg.seed}"
    if cfg.include_victim:
        label += ";include_victim"
    return AttackResult(victim, base, tau, float(np.mean(extra < tau)), pooled, forged_only, label, degenerate)


def imitation_features(spec: ImitationSpec, sample_size: int, n_attempts: int, seed: int = 0,
                       rate_hz: float = 100.0, maf: int = 9, peaks: PeakParams = PeakParams(),
                       user_id: str = "imitator") -> FeatureSet:
    """Feature vectors of ``n_attempts`` windows typed by the imitator."""
    duration = max(1.0, n_attempts * sample_size / rate_hz + 1.0)
    rec = generate_recording(spec.mixed_spec(), duration, rate_hz, seed, user_id=user_id)
    windows = chunk(rec, sample_size)[:n_attempts]
    return FeatureSet.from_windows(windows, maf, peaks)


def imitation_attack(spec: ImitationSpec, fs: FeatureSet, victim, sample_size: int,
                     metric: MetricSpec = MetricSpec(), n_attempts: int = 50, seed: int = 0,
                     maf: int = 9, peaks: PeakParams = PeakParams(), bounds: str = "population",
                     D=None, aggregation: str = "mean") -> AttackResult:
    """Accept rate of an imitator against ``victim``'s samples in ``fs``.

    ``fs`` holds the natural windows (victim and zero-effort impostors) at
    ``sample_size``; the victim's EER threshold is taken from them. Each
    attacker window is scored against all of the victim's samples at once
    (mean or min distance) and accepted below that threshold.
    """
    if n_attempts < 1:
        raise ValueError("n_attempts must be >= 1")
    if aggregation not in ("mean", "min"):
        raise ValueError("aggregation must be 'mean' or 'min'")
    attack = imitation_features(spec, sample_size, n_attempts, seed, maf=maf, peaks=peaks)
    genuine, impostor, extra = user_scores(fs.X, fs.user_ids, victim, metric, extra_impostors=attack.X,
                                           bounds=bounds, D=D)
    base, tau = eer(*sweep_scores(genuine, impostor))
    # one decision per attacker window against the whole profile, as in verification
    per_window = extra.reshape(len(attack), -1)
    scores = per_window.min(axis=1) if aggregation == "min" else per_window.mean(axis=1)
    label = f"alpha={spec.fidelity:g};attempts={len(attack)};seed={seed}"
    return AttackResult(victim, base, tau, float(np.mean(scores < tau)), config=label)
