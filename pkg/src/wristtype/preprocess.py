"""Moving-average noise removal and per-axis decomposition of windows."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import WindowTooShort
from .ingest import AXES, AXIS_COLUMNS, DEFAULT_RATE_HZ, Window

DEFAULT_MAF = 9


@dataclass(frozen=True)
class FilterConfig:
    m: int = DEFAULT_MAF

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("moving-average length must be >= 1")


@dataclass(frozen=True, eq=False)
class CleanWindow:
    """Six filtered axis series stacked as a (6, L) array in AXES order."""

    user_id: str
    series: np.ndarray
    sample_rate_hz: float = DEFAULT_RATE_HZ

    def __post_init__(self):
        arr = np.asarray(self.series, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != 6:
            raise ValueError(f"expected a (6, L) array, got shape {arr.shape}")
        if arr.shape[1] < 2:
            raise WindowTooShort(f"filtered series have length {arr.shape[1]}, need >= 2")
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite values in clean window")
        object.__setattr__(self, "series", arr)

    def __getattr__(self, name):
        # x_a, y_a, ... access to the individual rows
        if name in AXES:
            return self.series[AXES.index(name)]
        raise AttributeError(name)

    @property
    def length(self) -> int:
        return self.series.shape[1]


def maf_filter(series, m: int) -> np.ndarray:
    """M-point moving average, valid mode: ``out[i] = mean(series[i:i+m])``."""
    x = np.asarray(series, dtype=float)
    if m < 1:
        raise ValueError("m must be >= 1")
    if x.shape[-1] < m:
        raise WindowTooShort(f"series of length {x.shape[-1]} is shorter than m={m}")
    if m == 1:
        return x.copy()
    return sliding_window_view(x, m, axis=-1).mean(axis=-1)


def preprocess_window(w: Window, cfg: FilterConfig = FilterConfig()) -> CleanWindow:
    """Filter all six motion axes of ``w`` with the same M."""
    axes = w.data[:, AXIS_COLUMNS].T
    return CleanWindow(w.user_id, maf_filter(axes, cfg.m), w.sample_rate_hz)
