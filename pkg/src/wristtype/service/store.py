"""Directory-backed profile store.

One JSON document per user holds the enrolled profile and the session
state. Every write goes to a temporary file in the same directory, is
fsynced and then renamed over the old document, so a crash leaves either
the old or the new version on disk, never a torn one. Failed verification
attempts are appended to ``audit.log`` as JSON lines.
"""
from __future__ import annotations

import enum
import json
import logging
import os
import re
import tempfile
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import UnknownUser, WristTypeError
from ..features import N_FEATURES, Normalizer, fit_normalizer

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
_SAFE_ID = re.compile(r"^[A-Za-z0-9_.-]{1,64}$")


class CorruptStore(WristTypeError):
    pass


class Status(str, enum.Enum):
    ACTIVE = "active"
    SUSPENDED = "suspended"


@dataclass(frozen=True, eq=False)
class UserProfile:
    """Enrolled templates of one user, raw (before normalization)."""

    user_id: str
    start_ts: np.ndarray
    end_ts: np.ndarray
    templates: np.ndarray
    created_at: float
    updated_at: float

    def __post_init__(self):
        T = np.atleast_2d(np.asarray(self.templates, dtype=float))
        if T.shape[0] < 1 or T.shape[1] != N_FEATURES:
            raise ValueError(f"a profile needs >= 1 template of {N_FEATURES} features")
        object.__setattr__(self, "templates", T)
        object.__setattr__(self, "start_ts", np.asarray(self.start_ts, dtype=float).reshape(T.shape[0]))
        object.__setattr__(self, "end_ts", np.asarray(self.end_ts, dtype=float).reshape(T.shape[0]))

    @property
    def n_templates(self) -> int:
        return self.templates.shape[0]

    @property
    def normalizer(self) -> Normalizer:
        return fit_normalizer(self.templates)

    def __eq__(self, other):
        if not isinstance(other, UserProfile):
            return NotImplemented
        return (self.user_id == other.user_id
                and np.array_equal(self.templates, other.templates)
                and np.array_equal(self.start_ts, other.start_ts)
                and np.array_equal(self.end_ts, other.end_ts)
                and self.created_at == other.created_at
                and self.updated_at == other.updated_at)

    def to_json(self) -> dict:
        return {
            "user_id": self.user_id,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "templates": [
                {"t_start": float(s), "t_end": float(e), "f": row.tolist()}
                for s, e, row in zip(self.start_ts, self.end_ts, self.templates)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "UserProfile":
        t = doc["templates"]
        return cls(doc["user_id"], [x["t_start"] for x in t], [x["t_end"] for x in t],
                   [x["f"] for x in t], doc["created_at"], doc["updated_at"])


@dataclass(frozen=True)
class SessionState:
    user_id: str
    status: Status = Status.ACTIVE
    consecutive_failures: int = 0
    last_verified_at: float | None = None
    matches_since_update: int = 0

    def to_json(self) -> dict:
        return {"user_id": self.user_id, "status": self.status.value,
                "consecutive_failures": self.consecutive_failures,
                "last_verified_at": self.last_verified_at,
                "matches_since_update": self.matches_since_update}

    @classmethod
    def from_json(cls, doc: dict) -> "SessionState":
        return cls(doc["user_id"], Status(doc["status"]), int(doc["consecutive_failures"]),
                   doc["last_verified_at"], int(doc.get("matches_since_update", 0)))


@dataclass(frozen=True)
class Record:
    """What the store keeps per user: the profile and its session."""

    profile: UserProfile
    session: SessionState = field(default=None)

    def __post_init__(self):
        if self.session is None:
            object.__setattr__(self, "session", SessionState(self.profile.user_id))


def check_user_id(user_id) -> str:
    if not isinstance(user_id, str) or not _SAFE_ID.match(user_id):
        raise ValueError(f"invalid user id {user_id!r}")
    return user_id


def atomic_write(path: Path, data: bytes) -> None:
    """Write ``data`` to ``path`` through a fsynced temporary file and a rename."""
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    try:
        dir_fd = os.open(path.parent, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(dir_fd)
    except OSError:
        pass
    finally:
        os.close(dir_fd)


class ProfileStore:
    """Map user id -> Record, mirrored in ``root/users/<id>.json``.

    Records are immutable; a write swaps in a new object, so a reader that
    fetched a record keeps a consistent snapshot. Mutations of one user are
    serialized through :meth:`lock`.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.users_dir = self.root / "users"
        self.users_dir.mkdir(parents=True, exist_ok=True)
        self.audit_path = self.root / "audit.log"
        self._records: dict[str, Record] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self._audit_lock = threading.Lock()
        self._load_all()

    def _path(self, user_id) -> Path:
        return self.users_dir / f"{check_user_id(user_id)}.json"

    def _load_all(self):
        for stale in self.users_dir.glob(".*.tmp"):
            # leftovers of an interrupted write; the target file is intact
            log.warning("removing stale temporary file %s", stale.name)
            stale.unlink()
        for path in sorted(self.users_dir.glob("*.json")):
            rec = self._read(path)
            self._records[rec.profile.user_id] = rec

    @staticmethod
    def _read(path: Path) -> Record:
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise CorruptStore(f"{path}: {exc}") from exc
        if doc.get("version") != FORMAT_VERSION:
            raise CorruptStore(f"{path}: unsupported format version {doc.get('version')!r}")
        return Record(UserProfile.from_json(doc["profile"]), SessionState.from_json(doc["session"]))

    def lock(self, user_id) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(user_id, threading.Lock())

    def users(self) -> list[str]:
        return sorted(self._records)

    def __contains__(self, user_id) -> bool:
        return user_id in self._records

    def get(self, user_id) -> Record:
        try:
            return self._records[user_id]
        except KeyError:
            raise UnknownUser(f"user {user_id!r} is not enrolled") from None

    def put(self, record: Record) -> None:
        """Persist and publish a record; the caller holds the user's lock."""
        doc = {"version": FORMAT_VERSION, "profile": record.profile.to_json(),
               "session": record.session.to_json()}
        data = (json.dumps(doc, sort_keys=True, indent=1) + "\n").encode("utf-8")
        atomic_write(self._path(record.profile.user_id), data)
        self._records[record.profile.user_id] = record

    def update_session(self, user_id, **changes) -> Record:
        rec = self.get(user_id)
        new = replace(rec, session=replace(rec.session, **changes))
        self.put(new)
        return new

    def audit(self, entry: dict) -> None:
        line = json.dumps(entry, sort_keys=True) + "\n"
        with self._audit_lock, open(self.audit_path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

    def audit_entries(self) -> list[dict]:
        if not self.audit_path.exists():
            return []
        with open(self.audit_path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def snapshot(self) -> dict:
        """Plain-data view of every record (used to compare store states)."""
        return {u: {"profile": r.profile.to_json(), "session": r.session.to_json()}
                for u, r in sorted(self._records.items())}
