"""Slow, independent reference implementations used as test oracles.

Everything here is written from the definitions with plain Python loops
(plus an explicit DFT matrix), sharing no code with the package.
"""
from __future__ import annotations

import math

import numpy as np


def mean(xs):
    return math.fsum(xs) / len(xs)


def central_moment(xs, k):
    m = mean(xs)
    return math.fsum((x - m) ** k for x in xs) / len(xs)


def percentile(xs, q):
    # linear interpolation between closest ranks
    s = sorted(xs)
    h = (len(s) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (h - lo) * (s[hi] - s[lo])


def peaks(xs, min_separation=10, height_k=1.0):
    n = len(xs)
    if n < 3 or max(xs) == min(xs):
        return []
    thr = mean(xs) + height_k * math.sqrt(central_moment(xs, 2))
    cand = [i for i in range(1, n - 1) if xs[i] > xs[i - 1] and xs[i] >= xs[i + 1] and xs[i] >= thr]
    kept = []
    for i in sorted(cand, key=lambda i: (-xs[i], i)):
        if all(abs(i - j) >= min_separation for j in kept):
            kept.append(i)
    return sorted(kept)


def mode(xs, bins=100):
    lo, hi = min(xs), max(xs)
    if lo == hi:
        return lo
    span = hi - lo
    counts = [0] * bins
    for x in xs:
        b = int(math.floor((x - lo) / span * bins))
        counts[min(max(b, 0), bins - 1)] += 1
    best = counts.index(max(counts))
    return lo + (best + 0.5) * span / bins


def time_features(xs, rate=100.0, min_separation=10, height_k=1.0):
    flat = max(xs) == min(xs)
    m2 = central_moment(xs, 2)
    pk = peaks(xs, min_separation, height_k) if len(xs) >= 3 else []
    gaps = [b - a for a, b in zip(pk, pk[1:])]
    interval = (sum(gaps) / len(gaps) / rate) if gaps else 0.0
    m = mean(xs)
    return [
        m,
        percentile(xs, 0.5),
        0.0 if flat else m2,
        interval,
        max(xs) - min(xs),
        mode(xs),
        math.fsum(abs(x - m) for x in xs) / len(xs),
        percentile(xs, 0.75) - percentile(xs, 0.25),
        0.0 if flat else central_moment(xs, 3) / m2 ** 1.5,
        0.0 if flat else central_moment(xs, 4) / m2 ** 2,
    ]


def cov(xs, ys):
    mx, my = mean(xs), mean(ys)
    return math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys)) / len(xs)


def pair_features(x, y, z):
    out_cov, out_corr = [], []
    for a, b in ((x, y), (x, z), (y, z)):
        if max(a) == min(a) or max(b) == min(b):
            out_cov.append(0.0)
            out_corr.append(0.0)
            continue
        c = cov(a, b)
        out_cov.append(c)
        out_corr.append(c / math.sqrt(cov(a, a) * cov(b, b)))
    return out_cov + out_corr


def dft_power(xs):
    # the DFT written out as its matrix, no FFT involved
    n = len(xs)
    k = np.arange(n)
    W = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return (np.abs(W @ np.asarray(xs, dtype=float)) ** 2).tolist()


def freq_features(xs):
    power = dft_power(xs)
    total = math.fsum(power)
    if total == 0:
        return 0.0, 0.0
    entropy = -math.fsum(p / total * math.log2(p / total) for p in power if p > 0)
    return max(entropy, 0.0), total / len(xs)


def feature_vector(series, rate=100.0):
    """84 features of a 6-row series (rows in x_a, y_a, z_a, x_g, y_g, z_g order)."""
    rows = [list(map(float, r)) for r in series]
    out = []
    for r in rows:
        out += time_features(r, rate)
    out += pair_features(*rows[:3])
    out += pair_features(*rows[3:])
    for r in rows:
        out += list(freq_features(r))
    return out


# -------------------------------------------------------------- distances

def cityblock(a, b):
    return math.fsum(abs(x - y) for x, y in zip(a, b)) / len(a)


def euclidean(a, b):
    return math.sqrt(math.fsum((x - y) ** 2 for x, y in zip(a, b))) / math.sqrt(len(a))


def minkowski(a, b, p):
    return math.fsum(abs(x - y) ** p for x, y in zip(a, b)) ** (1.0 / p) / len(a) ** (1.0 / p)


def cosine(a, b):
    na = math.sqrt(math.fsum(x * x for x in a))
    nb = math.sqrt(math.fsum(y * y for y in b))
    if na == 0 or nb == 0:
        return 0.5
    return (1.0 - math.fsum(x * y for x, y in zip(a, b)) / (na * nb)) / 2.0


def correlation(a, b):
    if max(a) == min(a) or max(b) == min(b):
        return 0.5
    r = cov(a, b) / math.sqrt(cov(a, a) * cov(b, b))
    return (1.0 - r) / 2.0


def far_frr(D, labels, thresholds):
    """Brute-force attempt counting over ordered pairs i != j."""
    n = len(labels)
    far, frr = [], []
    for t in thresholds:
        ga = gt = ia = it = 0
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                if labels[i] == labels[j]:
                    gt += 1
                    ga += D[i][j] < t
                else:
                    it += 1
                    ia += D[i][j] < t
        far.append(ia / it)
        frr.append(1 - ga / gt)
    return far, frr
