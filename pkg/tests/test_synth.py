import numpy as np
import pytest

from wristtype.errors import BadDuration, IndexOutOfRange
from wristtype.features import PeakParams, detect_peaks
from wristtype.ingest import parse_recording
from wristtype.preprocess import maf_filter
from wristtype.synth import (PopulationSpec, SyntheticUserSpec, generate_population, generate_recording,
                             interpolate_specs, read_manifest, read_population_spec, sample_user_spec)


def test_zero_separation_identical_parameters():
    pop = PopulationSpec(n_users=5, separation=0.0)
    vecs = [sample_user_spec(pop, i).as_vector() for i in range(5)]
    assert all(np.array_equal(v, vecs[0]) for v in vecs)
    assert np.array_equal(vecs[0], SyntheticUserSpec().as_vector())


def test_default_users_differ_and_are_deterministic():
    pop = PopulationSpec(n_users=10)
    specs = [sample_user_spec(pop, i) for i in range(10)]
    assert len({s.as_vector().tobytes() for s in specs}) == 10
    assert sample_user_spec(pop, 3) == specs[3]
    with pytest.raises(IndexOutOfRange):
        sample_user_spec(pop, 10)


def test_single_keystroke_single_peak():
    spec = SyntheticUserSpec(noise_std_acc=0.0, noise_std_gyro=0.0)
    rec = generate_recording(spec, 5.0, event_times_s=[2.5])
    z = maf_filter(rec.data[:, 3], 9)
    peaks = detect_peaks(z, PeakParams(10, 1.0))
    assert peaks.size == 1
    assert abs(peaks[0] + 4 - 250) <= 2


def test_recording_shape_and_timestamps():
    rec = generate_recording(SyntheticUserSpec(), 240.0, session_seed=1)
    assert rec.data.shape == (24000, 8)
    assert np.array_equal(rec.data[:, 0], rec.data[:, 4])
    assert np.all(np.diff(rec.data[:, 0]) == 10.0)
    with pytest.raises(BadDuration):
        generate_recording(SyntheticUserSpec(), 0.5)


def test_sessions_differ_but_regenerate_identically():
    spec = SyntheticUserSpec()
    a = generate_recording(spec, 10.0, session_seed=1)
    b = generate_recording(spec, 10.0, session_seed=2)
    assert not np.array_equal(a.data, b.data)
    assert generate_recording(spec, 10.0, session_seed=1).data.tobytes() == a.data.tobytes()


def test_interpolation():
    a = SyntheticUserSpec(key_rate_hz=2.0, seed_user=1)
    b = SyntheticUserSpec(key_rate_hz=4.0, seed_user=2)
    m = interpolate_specs(a, b, 0.25)
    assert m.key_rate_hz == pytest.approx(2.5) and m.seed_user == 1
    with pytest.raises(ValueError):
        interpolate_specs(a, b, -0.1)


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticUserSpec(rate_cv=1.0)
    with pytest.raises(ValueError):
        PopulationSpec(n_users=1)


def test_population_on_disk(tmp_path):
    pop = PopulationSpec(n_users=3, duration_s=5.0, seed=2)
    items = generate_population(pop, 2, tmp_path)
    rows = read_manifest(tmp_path / "manifest.csv")
    assert [(r[0], r[1]) for r in rows] == [(u, s) for u, s, *_ in items]
    for (uid, _, path, seed), (_, _, seed2, rec) in zip(rows, items):
        assert seed == seed2
        assert parse_recording(path, uid) == rec
    assert read_population_spec(tmp_path / "population.json") == pop
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    generate_population(pop, 2, tmp_path)
    assert {p.name: p.read_bytes() for p in tmp_path.iterdir()} == first
