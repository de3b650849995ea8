import socket
import threading

import numpy as np
import pytest

from wristtype.decision import Decision, MetricSpec, Policy, verify_window
from wristtype.errors import (AlreadyEnrolled, BadPolicy, InsufficientWindows, SessionSuspended, UnknownUser)
from wristtype.features import fit_normalizer
from wristtype.ingest import Window, chunk
from wristtype.service import (AuthService, Client, ProfileStore, Status, WindowSizeMismatch, format_policy,
                               parse_policy, start_server, stop_server)
from wristtype.service import store as store_mod
from wristtype.synth import PopulationSpec, generate_recording, sample_user_spec

POLICY = Policy(sample_size=500)
POP = PopulationSpec(n_users=4, seed=5)


def windows_of(user_index, n, session=0, size=500):
    spec = sample_user_spec(POP, user_index)
    rec = generate_recording(spec, n * size / 100.0 + 1, session_seed=session, user_id=f"u{user_index}")
    return chunk(rec, size)[:n]


@pytest.fixture
def service(tmp_path):
    return AuthService(ProfileStore(tmp_path / "store"), POLICY)


def test_enroll_and_reload(service, tmp_path):
    ws = windows_of(0, 4)
    profile = service.enroll("alice", ws)
    assert profile.n_templates == 4
    again = ProfileStore(tmp_path / "store")
    assert again.get("alice").profile == profile
    assert again.snapshot() == service.store.snapshot()


def test_enroll_errors(service):
    ws = windows_of(0, 3)
    with pytest.raises(InsufficientWindows):
        service.enroll("alice", ws[:1])
    service.enroll("alice", ws)
    with pytest.raises(AlreadyEnrolled):
        service.enroll("alice", ws)
    assert service.enroll("alice", ws[:2], replace_existing=True).n_templates == 2
    with pytest.raises(UnknownUser):
        service.verify("bob", ws[0])
    with pytest.raises(WindowSizeMismatch):
        service.verify("alice", windows_of(0, 1, size=400)[0])
    with pytest.raises(ValueError):
        service.enroll("../etc", ws)


def test_enroll_keeps_newest(tmp_path):
    svc = AuthService(ProfileStore(tmp_path), Policy(sample_size=500, max_templates=3))
    ws = windows_of(0, 5)
    p = svc.enroll("a", ws)
    assert p.start_ts.tolist() == [w.start_ts for w in ws[-3:]]


def test_zero_window_rejected(service):
    service.enroll("alice", windows_of(0, 4))
    zero = Window.from_rows("alice", np.column_stack([np.arange(500) * 10.0, np.zeros((500, 3)),
                                                      np.arange(500) * 10.0, np.zeros((500, 3))]))
    res = service.verify("alice", zero)
    assert res.decision is Decision.NO_MATCH
    assert res.status is Status.SUSPENDED
    with pytest.raises(SessionSuspended):
        service.verify("alice", zero)
    assert service.store.audit_entries()[-1]["user_id"] == "alice"
    assert service.reset("alice").status is Status.ACTIVE
    assert service.status("alice")["consecutive_failures"] == 0


def test_decision_matches_offline(service):
    ws = windows_of(1, 6)
    service.enroll("u", ws[:4])
    templates = service.store.get("u").profile.templates.copy()
    res = service.verify("u", ws[4])
    d, s, _ = verify_window(ws[4], templates, POLICY)
    assert (res.decision, res.score) == (d, s)


def test_fifo_update(tmp_path):
    pol = Policy(sample_size=500, max_templates=4, threshold=1.0)
    svc = AuthService(ProfileStore(tmp_path), pol)
    ws = windows_of(0, 7)
    svc.enroll("a", ws[:4])
    for w in ws[4:]:
        assert svc.verify("a", w).updated
    prof = svc.store.get("a").profile
    assert prof.n_templates == 4
    assert prof.start_ts.tolist() == [w.start_ts for w in ws[3:]]
    nz = prof.normalizer
    ref = fit_normalizer(prof.templates)
    assert np.array_equal(nz.x_min, ref.x_min) and np.array_equal(nz.x_max, ref.x_max)


def test_no_update_when_disabled(tmp_path):
    pol = Policy(sample_size=500, threshold=1.0, update_after_match=False)
    svc = AuthService(ProfileStore(tmp_path), pol)
    ws = windows_of(0, 5)
    before = svc.enroll("a", ws[:4])
    res = svc.verify("a", ws[4])
    assert res.decision is Decision.MATCH and not res.updated
    assert svc.store.get("a").profile == before


def test_update_every(tmp_path):
    pol = Policy(sample_size=500, threshold=1.0, update_every=2)
    svc = AuthService(ProfileStore(tmp_path), pol)
    ws = windows_of(0, 6)
    svc.enroll("a", ws[:4])
    assert [svc.verify("a", w).updated for w in ws[4:]] == [False, True]


def test_failed_write_keeps_old_file(service, monkeypatch):
    ws = windows_of(0, 4)
    service.enroll("alice", ws)
    path = service.store.users_dir / "alice.json"
    before = path.read_bytes()

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(store_mod.os, "replace", boom)
    with pytest.raises(OSError):
        service.enroll("alice", ws[:2], replace_existing=True)
    monkeypatch.undo()
    assert path.read_bytes() == before
    assert list(service.store.users_dir.glob(".*.tmp")) == []


def test_stale_tmp_removed(tmp_path):
    users = tmp_path / "users"
    users.mkdir()
    (users / ".alice.json.x1.tmp").write_text("{partial")
    ProfileStore(tmp_path)
    assert list(users.iterdir()) == []


def test_corrupt_file_detected(tmp_path):
    (tmp_path / "users").mkdir()
    (tmp_path / "users" / "a.json").write_text("{not json")
    with pytest.raises(store_mod.CorruptStore):
        ProfileStore(tmp_path)


def test_concurrent_verifications(service):
    users = {f"u{i}": windows_of(i, 12) for i in range(3)}
    for u, ws in users.items():
        service.enroll(u, ws[:4])
    svc = AuthService(service.store, Policy(sample_size=500, threshold=1.0, max_templates=6))
    errors = []

    def run(u, ws):
        try:
            for w in ws[4:]:
                svc.verify(u, w)
        except Exception as exc:  # pragma: no cover - surfaced below
            errors.append(exc)

    threads = [threading.Thread(target=run, args=item) for item in users.items()]
    threads += [threading.Thread(target=run, args=("u0", users["u0"]))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
    again = ProfileStore(service.store.root)
    assert again.snapshot() == svc.store.snapshot()
    assert all(again.get(u).profile.n_templates == 6 for u in users)


# ------------------------------------------------------------------ policy

def test_policy_parse_round_trip():
    pol = Policy(threshold=0.31, metric=MetricSpec("minkowski", 3.0), max_templates=7, update_after_match=False)
    assert parse_policy(format_policy(pol)) == pol
    assert parse_policy("threshold = 0.4  # comment\n\nmetric = cosine\n").metric == MetricSpec("cosine")
    assert parse_policy("metric = minkowski\np = 4").metric == MetricSpec("minkowski", 4.0)


@pytest.mark.parametrize("text", ["colour = red", "threshold = 2", "threshold", "max_templates = x",
                                  "update_after_match = maybe", "metric = hamming"])
def test_policy_parse_errors(text):
    with pytest.raises(BadPolicy):
        parse_policy(text)


# ------------------------------------------------------------------ socket

@pytest.fixture
def server(tmp_path):
    srv, thread = start_server(tmp_path / "store", POLICY)
    yield srv
    stop_server(srv, thread)


def test_socket_round_trip(server):
    ws = windows_of(2, 5)
    with Client(*server.address) as c:
        assert c.enroll("u2", [w.data for w in ws[:4]]) == {"ok": True, "templates": 4}
        r = c.verify("u2", ws[4].data)
        assert r["ok"] and r["decision"] in ("match", "no_match")
        assert c.status("u2")["ok"]
        assert c.verify("nobody", ws[4].data)["error"] == "unknown_user"
        assert c.enroll("u2", [w.data for w in ws[:4]])["error"] == "already_enrolled"
        assert c.enroll("u3", [ws[0].data])["error"] == "insufficient_windows"
        assert c.call(op="dance", user="u2")["error"] == "bad_request"
        assert c.verify("u2", ws[4].data[:100])["error"] == "bad_request"


def test_enroll_single_long_window_is_chunked(server):
    rec = np.vstack([w.data for w in windows_of(1, 3)])
    with Client(*server.address) as c:
        assert c.call(op="enroll", user="x", window=rec.tolist()) == {"ok": True, "templates": 3}


def test_malformed_json_keeps_connection(server):
    with Client(*server.address) as c:
        assert c.send_raw(b"{oops")["error"] == "bad_request"
        assert c.send_raw(b"[1, 2]")["error"] == "bad_request"
        assert c.status("nobody")["error"] == "unknown_user"


def test_server_survives_abrupt_disconnect(server):
    s = socket.create_connection(server.address)
    s.sendall(b'{"op": "status", "us')
    s.close()
    with Client(*server.address) as c:
        assert c.status("nobody")["error"] == "unknown_user"
