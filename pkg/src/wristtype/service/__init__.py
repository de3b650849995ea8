"""Enrollment and continuous-verification service."""
from .core import AuthService, VerifyResult, WindowSizeMismatch
from .policy import format_policy, load_policy, parse_policy
from .server import AuthServer, Client, handle_request, parse_listen, start_server, stop_server
from .store import FORMAT_VERSION, ProfileStore, Record, SessionState, Status, UserProfile

__all__ = [
    "AuthService", "VerifyResult", "WindowSizeMismatch",
    "format_policy", "load_policy", "parse_policy",
    "AuthServer", "Client", "handle_request", "parse_listen", "start_server", "stop_server",
    "FORMAT_VERSION", "ProfileStore", "Record", "SessionState", "Status", "UserProfile",
]
