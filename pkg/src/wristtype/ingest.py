"""Raw sensor recordings: data model, CSV reading/writing and windowing.

A recording file is a CSV with the header ``t_a,x_a,y_a,z_a,t_g,x_g,y_g,z_g``
and one fused accelerometer+gyroscope frame per line. Timestamps are in
milliseconds, accelerations in m/s^2 and angular rates in rad/s.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    EmptyFile,
    MalformedLine,
    MisalignedTimestamps,
    NonMonotoneTimestamp,
    SampleSizeTooSmall,
)

COLUMNS = ("t_a", "x_a", "y_a", "z_a", "t_g", "x_g", "y_g", "z_g")
HEADER = ",".join(COLUMNS)
AXES = ("x_a", "y_a", "z_a", "x_g", "y_g", "z_g")
# column positions of the six motion axes inside a frame row
AXIS_COLUMNS = (1, 2, 3, 5, 6, 7)
DEFAULT_RATE_HZ = 100.0


class SensorFrame(NamedTuple):
    t_a: float
    x_a: float
    y_a: float
    z_a: float
    t_g: float
    x_g: float
    y_g: float
    z_g: float


@dataclass(frozen=True, eq=False)
class Recording:
    """One user session. ``data`` is an (n, 8) float array in COLUMNS order."""

    user_id: str
    sample_rate_hz: float
    data: np.ndarray

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 8:
            raise ValueError(f"expected an (n, 8) array, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    def __len__(self):
        return self.data.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        return (
            self.user_id == other.user_id
            and self.sample_rate_hz == other.sample_rate_hz
            and np.array_equal(self.data, other.data)
        )

    @property
    def frames(self) -> list[SensorFrame]:
        return [SensorFrame(*row) for row in self.data.tolist()]

    @property
    def duration_seconds(self) -> float:
        if len(self) < 2:
            return 0.0
        return (self.data[-1, 0] - self.data[0, 0]) / 1000.0


@dataclass(frozen=True, eq=False)
class Window:
    """A fixed-length chunk of a recording; the unit of authentication."""

    user_id: str
    start_ts: float
    end_ts: float
    data: np.ndarray
    sample_rate_hz: float = DEFAULT_RATE_HZ

    @property
    def sample_size(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> list[SensorFrame]:
        return [SensorFrame(*row) for row in self.data.tolist()]

    @property
    def duration_seconds(self) -> float:
        return self.sample_size / self.sample_rate_hz

    def axis(self, name: str) -> np.ndarray:
        return self.data[:, COLUMNS.index(name)]

    @classmethod
    def from_rows(cls, user_id, rows, sample_rate_hz=DEFAULT_RATE_HZ):
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 8 or arr.shape[0] == 0:
            raise ValueError("window rows must be a non-empty (n, 8) array")
        return cls(user_id, float(arr[0, 0]), float(arr[-1, 0]), arr, sample_rate_hz)


def _parse_line(line, line_no):
    parts = line.split(",")
    if len(parts) != 8:
        raise MalformedLine(line_no, f"expected 8 fields, got {len(parts)}")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise MalformedLine(line_no, "non-numeric field") from None
    if not all(math.isfinite(v) for v in values):
        raise MalformedLine(line_no, "non-finite value")
    return values


def parse_recording(path, user_id: str, sample_rate_hz: float = DEFAULT_RATE_HZ) -> Recording:
    """Read a recording CSV.

    Raises MalformedLine, NonMonotoneTimestamp, MisalignedTimestamps or
    EmptyFile; line numbers are 1-based and count the header.
    """
    period_ms = 1000.0 / sample_rate_hz
    rows = []
    prev_a = prev_g = -math.inf
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line_no == 1 and line.replace(" ", "") == HEADER:
                continue
            values = _parse_line(line, line_no)
            t_a, t_g = values[0], values[4]
            if t_a < prev_a or t_g < prev_g:
                raise NonMonotoneTimestamp(line_no)
            if abs(t_a - t_g) > period_ms:
                raise MisalignedTimestamps(line_no)
            prev_a, prev_g = t_a, t_g
            rows.append(values)
    if not rows:
        raise EmptyFile(str(path))
    return Recording(user_id, float(sample_rate_hz), np.array(rows, dtype=float))


def write_recording(rec: Recording, path) -> Path:
    """Write ``rec`` in the CSV format read by :func:`parse_recording`.

    Values are written with ``repr`` so a read-back is bit-identical.
    """
    path = Path(path)
    lines = [HEADER]
    lines.extend(",".join(map(repr, row)) for row in rec.data.tolist())
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def chunk(rec: Recording, sample_size: int) -> list[Window]:
    """Split a recording into consecutive non-overlapping windows.

    The trailing partial window is dropped.
    """
    if sample_size < 2:
        raise SampleSizeTooSmall(f"sample_size must be >= 2, got {sample_size}")
    n_windows = len(rec) // sample_size
    windows = []
    for k in range(n_windows):
        block = rec.data[k * sample_size:(k + 1) * sample_size]
        windows.append(
            Window(rec.user_id, float(block[0, 0]), float(block[-1, 0]), block, rec.sample_rate_hz)
        )
    return windows
