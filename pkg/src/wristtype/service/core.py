"""Enrollment, verification and profile update on top of a ProfileStore.

The decision itself is delegated to :func:`wristtype.decision.verify_window`,
the same function the offline pipeline uses, so the service cannot drift
from the library.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from ..decision import Decision, Policy, verify_window
from ..errors import AlreadyEnrolled, InsufficientWindows, SessionSuspended, WristTypeError
from ..features import window_features
from ..ingest import Window
from .store import ProfileStore, Record, SessionState, Status, UserProfile, check_user_id

log = logging.getLogger(__name__)


class WindowSizeMismatch(WristTypeError):
    pass


@dataclass(frozen=True)
class VerifyResult:
    decision: Decision
    score: float
    status: Status
    updated: bool


class AuthService:
    """Request-level operations; safe to call from many threads."""

    def __init__(self, store: ProfileStore, policy: Policy = Policy(), clock=time.time):
        self.store = store
        self.policy = policy
        self.clock = clock

    def _check_window(self, window: Window):
        if window.sample_size != self.policy.sample_size:
            raise WindowSizeMismatch(
                f"window has {window.sample_size} frames, policy expects {self.policy.sample_size}")

    def enroll(self, user_id, windows, replace_existing: bool = False) -> UserProfile:
        """Store the feature vectors of ``windows`` as the user's templates.

        Only the newest ``max_templates`` windows are kept.
        """
        check_user_id(user_id)
        windows = list(windows)
        if len(windows) < 2:
            raise InsufficientWindows(f"enrollment needs >= 2 windows, got {len(windows)}")
        for w in windows:
            self._check_window(w)
        with self.store.lock(user_id):
            if user_id in self.store and not replace_existing:
                raise AlreadyEnrolled(f"user {user_id!r} is already enrolled")
            kept = windows[-self.policy.max_templates:]
            if len(kept) < len(windows):
                log.info("enroll %s: keeping the newest %d of %d windows", user_id, len(kept), len(windows))
            X = np.array([window_features(w, self.policy.maf_m) for w in kept])
            now = self.clock()
            profile = UserProfile(user_id, [w.start_ts for w in kept], [w.end_ts for w in kept], X, now, now)
            self.store.put(Record(profile, SessionState(user_id)))
        log.info("enrolled %s with %d templates", user_id, profile.n_templates)
        return profile

    def verify(self, user_id, window: Window) -> VerifyResult:
        self._check_window(window)
        with self.store.lock(user_id):
            rec = self.store.get(user_id)
            if rec.session.status is Status.SUSPENDED:
                raise SessionSuspended(f"session of {user_id!r} is suspended")
            decision, score, fv = verify_window(window, rec.profile.templates, self.policy)
            now = self.clock()
            session = rec.session
            updated = False
            if decision is Decision.MATCH:
                session = replace(session, consecutive_failures=0, last_verified_at=now,
                                  matches_since_update=session.matches_since_update + 1)
                profile = rec.profile
                if self.policy.update_after_match and session.matches_since_update >= self.policy.update_every:
                    profile = self._updated(profile, fv, window.start_ts, window.end_ts, now)
                    session = replace(session, matches_since_update=0)
                    updated = True
                rec = Record(profile, session)
            else:
                failures = session.consecutive_failures + 1
                status = Status.SUSPENDED if failures >= self.policy.suspend_after else session.status
                session = replace(session, consecutive_failures=failures, last_verified_at=now, status=status)
                rec = Record(rec.profile, session)
                self.store.audit({"user_id": user_id, "at": now, "score": score,
                                  "t_start": window.start_ts, "t_end": window.end_ts,
                                  "status": status.value})
                log.warning("failed verification for %s (score %.4f, status %s)", user_id, score, status.value)
            self.store.put(rec)
        return VerifyResult(decision, score, rec.session.status, updated)

    def _updated(self, profile: UserProfile, fv, t_start, t_end, now) -> UserProfile:
        keep = self.policy.max_templates - 1
        X = np.vstack([profile.templates[-keep:] if keep else profile.templates[:0], fv])
        s = np.append(profile.start_ts[-keep:] if keep else [], t_start)
        e = np.append(profile.end_ts[-keep:] if keep else [], t_end)
        return UserProfile(profile.user_id, s, e, X, profile.created_at, now)

    def update_profile(self, user_id, fv, t_start: float = 0.0, t_end: float = 0.0) -> UserProfile:
        """Append a raw feature vector, evicting the oldest beyond ``max_templates``."""
        with self.store.lock(user_id):
            rec = self.store.get(user_id)
            profile = self._updated(rec.profile, np.asarray(fv, dtype=float), t_start, t_end, self.clock())
            self.store.put(Record(profile, rec.session))
        return profile

    def reset(self, user_id) -> SessionState:
        """Re-activate a suspended session (the user re-authenticated elsewhere)."""
        with self.store.lock(user_id):
            self.store.get(user_id)
            rec = self.store.update_session(user_id, status=Status.ACTIVE, consecutive_failures=0)
        log.info("session of %s reset", user_id)
        return rec.session

    def status(self, user_id) -> dict:
        rec = self.store.get(user_id)
        return {"status": rec.session.status.value, "templates": rec.profile.n_templates,
                "consecutive_failures": rec.session.consecutive_failures}
