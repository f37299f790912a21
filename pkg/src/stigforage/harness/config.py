"""Plain-text ``key = value`` configuration files.

One setting per line, ``#`` starts a comment, lists are comma separated,
and ranges are written ``lo..hi``. Example matrix file::

    world_size = 128
    episode_length = 1024
    teams = 16, 32, 64, 128
    densities = 0, 0.05
    replicates = 50
    types = infinite, depleting, wipeout
    resources = 8..32
    seed = 0
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from pathlib import Path

SECTION = "settings"


def read_settings(path) -> dict:
    return parse_settings(Path(path).read_text())


def parse_settings(text: str) -> dict:
    """Parse config text into a ``{key: raw string}`` dict."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    parser.read_string(f"[{SECTION}]\n{text}")
    return dict(parser[SECTION])


def parse_value(raw: str, kind):
    """Convert a raw string to ``kind`` (int, float, str, bool, or a tuple of those)."""
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(kind, tuple):
        (inner,) = kind
        if ".." in raw:
            lo, hi = raw.split("..")
            return (inner(lo.strip()), inner(hi.strip()))
        return tuple(inner(part.strip()) for part in raw.split(",") if part.strip())
    if kind in (int, float) and raw.lower() in ("none", ""):
        return None
    return kind(raw)


@dataclass
class MatrixConfig:
    world_size: int = 128
    episode_length: int = 1024
    teams: tuple = (16, 32, 64, 128)
    densities: tuple = (0.0, 0.05)
    replicates: int = 50
    types: tuple = ("infinite", "depleting", "wipeout")
    resources: tuple = (8, 32)
    resource_capacity: int = 10  # units per resource in depleting scenarios
    wipeout_count: int = 3
    wipeout_duration: int = 100
    gather_rate: float = 1.0
    dropoff_rate: float = 1.0
    seed: int = 0

    KINDS = {
        "world_size": int,
        "episode_length": int,
        "teams": (int,),
        "densities": (float,),
        "replicates": int,
        "types": (str,),
        "resources": (int,),
        "resource_capacity": int,
        "wipeout_count": int,
        "wipeout_duration": int,
        "gather_rate": float,
        "dropoff_rate": float,
        "seed": int,
    }

    def __post_init__(self):
        from .scenarios import ScenarioType

        self.types = tuple(ScenarioType(t).value for t in self.types)
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        lo, hi = self.resources
        if not 1 <= lo <= hi:
            raise ValueError("resource range must satisfy 1 <= lo <= hi")
        if "wipeout" in self.types and self.wipeout_count * self.wipeout_duration > self.episode_length:
            raise ValueError("wipeout windows cannot fit in the episode without overlapping")

    @property
    def cells(self):
        return [(team, density) for team in self.teams for density in self.densities]

    @classmethod
    def from_file(cls, path, **overrides):
        return cls.from_text(Path(path).read_text(), **overrides)

    @classmethod
    def from_text(cls, text, **overrides):
        kwargs = settings_to_kwargs(parse_settings(text), cls.KINDS)
        kwargs.update(overrides)
        return cls(**kwargs)


def settings_to_kwargs(settings: dict, kinds: dict) -> dict:
    unknown = set(settings) - set(kinds)
    if unknown:
        raise ValueError(f"unknown settings: {sorted(unknown)}")
    return {key: parse_value(raw, kinds[key]) for key, raw in settings.items()}


def dataclass_kinds(cls) -> dict:
    """Best-effort kind map for a dataclass with simple annotated defaults."""
    out = {}
    for f in fields(cls):
        default = f.default
        if isinstance(default, bool):
            out[f.name] = bool
        elif isinstance(default, int):
            out[f.name] = int
        elif isinstance(default, float):
            out[f.name] = float
        elif isinstance(default, str):
            out[f.name] = str
        elif isinstance(default, tuple) and default:
            out[f.name] = (type(default[0]),)
    return out
