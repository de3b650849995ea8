import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wristtype.features import FeatureSet  # noqa: E402
from wristtype.ingest import chunk  # noqa: E402
from wristtype.synth import PopulationSpec, generate_population  # noqa: E402


def random_clean_series(rng, length):
    """6 x length series mixing noise, keystroke-like pulses and degenerate rows."""
    t = np.arange(length)
    s = rng.normal(0.0, 1.0, (6, length))
    for r in range(6):
        for c in rng.integers(0, length, size=max(1, length // 40)):
            s[r] += rng.uniform(1, 4) * np.exp(-0.5 * ((t - c) / rng.uniform(1, 4)) ** 2)
    kind = rng.integers(0, 5)
    if kind == 0:
        s[rng.integers(0, 6)] = rng.normal()  # constant axis
    elif kind == 1:
        s[rng.integers(0, 6)] = np.round(s[rng.integers(0, 6)], 1)  # ties for mode/median
    elif kind == 2:
        s[1] = s[0]  # perfectly correlated pair
    return s


@pytest.fixture(scope="session")
def small_population():
    """6 users x 2 sessions of 60 s; windows of 500 frames."""
    pop = PopulationSpec(n_users=6, duration_s=60.0, seed=11)
    return pop, generate_population(pop, 2)


@pytest.fixture(scope="session")
def small_features(small_population):
    _, items = small_population
    return FeatureSet.concat(FeatureSet.from_windows(chunk(rec, 500)) for *_, rec in items)


@pytest.fixture
def criterion(request):
    """Record one acceptance line; all lines are repeated in the terminal summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
