import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wristtype.errors import EmptyFile, MalformedLine, MisalignedTimestamps, NonMonotoneTimestamp, \
    SampleSizeTooSmall
from wristtype.ingest import HEADER, Recording, Window, chunk, parse_recording, write_recording
from wristtype.synth import SyntheticUserSpec, generate_recording


def _write(tmp_path, lines, header=True):
    p = tmp_path / "rec.csv"
    p.write_text("\n".join(([HEADER] if header else []) + lines) + "\n")
    return p


def _frames(n, start=0.0):
    t = start + 10.0 * np.arange(n)
    rows = np.zeros((n, 8))
    rows[:, 0] = rows[:, 4] = t
    return rows


def test_single_zero_line(tmp_path):
    rec = parse_recording(_write(tmp_path, ["0,0,0,0,0,0,0,0"], header=False), "u")
    assert len(rec) == 1
    assert np.all(rec.data == 0)


def test_three_frames_duration(tmp_path):
    lines = [f"{t},1,2,3,{t},4,5,6" for t in (0, 10, 20)]
    rec = parse_recording(_write(tmp_path, lines), "u")
    assert len(rec) == 3
    assert rec.duration_seconds == pytest.approx(0.02)
    assert rec.frames[1].x_g == 4.0


def test_round_trip_bit_identical(tmp_path):
    rec = generate_recording(SyntheticUserSpec(), duration_s=30.0, session_seed=5, user_id="u")
    assert len(rec) == 3000
    back = parse_recording(write_recording(rec, tmp_path / "r.csv"), "u")
    assert back == rec
    assert back.data.tobytes() == rec.data.tobytes()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=False), min_size=6, max_size=6),
                min_size=1, max_size=40))
def test_round_trip_property(tmp_path_factory, values):
    rows = _frames(len(values))
    rows[:, [1, 2, 3, 5, 6, 7]] = np.array(values)
    rec = Recording("u", 100.0, rows)
    path = tmp_path_factory.mktemp("rt") / "r.csv"
    assert parse_recording(write_recording(rec, path), "u") == rec


@pytest.mark.parametrize("line, reason", [
    ("0,1,2,3,0,4,5", "fields"),
    ("0,1,2,x,0,4,5,6", "non-numeric"),
    ("0,1,2,nan,0,4,5,6", "non-finite"),
])
def test_malformed_line_number(tmp_path, line, reason):
    with pytest.raises(MalformedLine) as exc:
        parse_recording(_write(tmp_path, ["0,0,0,0,0,0,0,0", line.replace("0,", "10,", 1)]), "u")
    assert exc.value.line_no == 3
    assert reason in str(exc.value)


def test_non_monotone(tmp_path):
    lines = ["0,0,0,0,0,0,0,0", "20,0,0,0,20,0,0,0", "10,0,0,0,10,0,0,0"]
    with pytest.raises(NonMonotoneTimestamp) as exc:
        parse_recording(_write(tmp_path, lines), "u")
    assert exc.value.line_no == 4


def test_misaligned(tmp_path):
    with pytest.raises(MisalignedTimestamps):
        parse_recording(_write(tmp_path, ["0,0,0,0,0,0,0,0", "10,0,0,0,30,0,0,0"]), "u")
    # one full frame period apart is still accepted
    assert len(parse_recording(_write(tmp_path, ["0,0,0,0,10,0,0,0"]), "u")) == 1


def test_empty_file(tmp_path):
    with pytest.raises(EmptyFile):
        parse_recording(_write(tmp_path, [], header=True), "u")


def test_chunk_counts():
    assert len(chunk(Recording("u", 100.0, _frames(25000)), 1000)) == 25
    assert chunk(Recording("u", 100.0, _frames(999)), 1000) == []


def test_chunk_concatenates_to_prefix():
    rec = Recording("u", 100.0, np.random.default_rng(0).normal(size=(3100, 8)).cumsum(axis=0))
    ws = chunk(rec, 1500)
    assert len(ws) == 2
    assert np.array_equal(np.vstack([w.data for w in ws]), rec.data[:3000])
    assert ws[1].start_ts == rec.data[1500, 0] and ws[1].end_ts == rec.data[2999, 0]
    assert all(w.sample_size == 1500 for w in ws)


def test_chunk_too_small():
    with pytest.raises(SampleSizeTooSmall):
        chunk(Recording("u", 100.0, _frames(10)), 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 500), st.integers(2, 120))
def test_chunk_invariants(n, size):
    ws = chunk(Recording("u", 100.0, _frames(n)), size)
    assert len(ws) == n // size
    assert sum(w.sample_size for w in ws) == size * len(ws) <= n


def test_window_duration():
    w = Window.from_rows("u", _frames(1500))
    assert w.duration_seconds == pytest.approx(15.0)
    assert abs(w.duration_seconds - (w.end_ts - w.start_ts) / 1000.0) <= 0.01
    assert np.array_equal(w.axis("t_g"), w.data[:, 4])
