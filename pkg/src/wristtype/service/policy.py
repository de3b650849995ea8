"""Flat ``key = value`` policy files."""
from __future__ import annotations

from pathlib import Path

from ..decision import MetricSpec, Policy
from ..errors import BadPolicy

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}

# file key -> (Policy field, parser)
_KEYS = {
    "threshold": ("threshold", float),
    "sample_size": ("sample_size", int),
    "maf": ("maf_m", int),
    "max_templates": ("max_templates", int),
    "suspend_after": ("suspend_after", int),
    "update_every": ("update_every", int),
    "aggregation": ("aggregation", str),
}


def _bool(text):
    try:
        return _BOOL[text.lower()]
    except KeyError:
        raise ValueError(f"not a boolean: {text!r}") from None


def parse_policy(text: str, base: Policy = Policy()) -> Policy:
    """Policy from key=value lines; '#' starts a comment, unknown keys are errors."""
    kw = {}
    metric, p = None, None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not value:
            raise BadPolicy(f"line {no}: expected key = value")
        try:
            if key in _KEYS:
                name, conv = _KEYS[key]
                kw[name] = conv(value)
            elif key == "update_after_match":
                kw["update_after_match"] = _bool(value)
            elif key == "metric":
                metric = value
            elif key == "p":
                p = float(value)
            else:
                raise BadPolicy(f"line {no}: unknown key {key!r}")
        except ValueError as exc:
            raise BadPolicy(f"line {no}: {exc}") from None
    try:
        if metric is not None or p is not None:
            m = MetricSpec.parse(metric) if metric is not None else base.metric
            kw["metric"] = MetricSpec(m.kind, p) if p is not None else m
        fields = {**base.__dict__, **kw}
        return Policy(**fields)
    except ValueError as exc:
        raise BadPolicy(str(exc)) from None


def load_policy(path) -> Policy:
    return parse_policy(Path(path).read_text(encoding="utf-8"))


def format_policy(policy: Policy) -> str:
    return "".join([
        f"threshold = {policy.threshold!r}\n",
        f"metric = {policy.metric}\n",
        f"sample_size = {policy.sample_size}\n",
        f"maf = {policy.maf_m}\n",
        f"max_templates = {policy.max_templates}\n",
        f"update_after_match = {str(policy.update_after_match).lower()}\n",
        f"update_every = {policy.update_every}\n",
        f"suspend_after = {policy.suspend_after}\n",
        f"aggregation = {policy.aggregation}\n",
    ])
