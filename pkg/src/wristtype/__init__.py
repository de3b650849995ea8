"""Wrist-motion keystroke dynamics: features, verification, identification and attacks."""

__version__ = "0.1.0"
