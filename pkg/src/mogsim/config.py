"""Experiment configuration and its TOML file format.

Example file::

    profile = "quick"          # or "full"; sets success_target / max_trials
    master_seed = 7
    pile_size = 30
    shapes = ["sphere:large"]  # kind:size_class
    workers = 1
    out_dir = "runs/quick"
    keep_trajectory = true

    [container]
    kind = "bowl"
    radius = 60.0

    [policy]                   # any StochasticPolicy field
    p = 0.7
    q = 0.1

    [friction]
    mu = 0.5

    [bucketing]                # any Bucketing field
    fully_above = 150.0

Explicit keys override the profile.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .classifier import Bucketing
from .closure import FrictionModel
from .grasp import StochasticPolicy
from .scene import Container, ShapeSpec

__all__ = ["PROFILES", "ConfigError", "ExperimentConfig", "parse_shape", "load_config"]

PROFILES = {
    "quick": {"success_target": 10, "max_trials": 500},
    "full": {"success_target": 100, "max_trials": 5000},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def parse_shape(text):
    """``"sphere:large"`` -> ``ShapeSpec("sphere", "large")``; the size defaults to large."""
    if isinstance(text, ShapeSpec):
        return text
    kind, _, size = str(text).partition(":")
    try:
        return ShapeSpec(kind.strip(), (size or "large").strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything ``run_batch`` needs.  ``max_trials = 0`` is allowed and runs nothing."""

    shapes: tuple = (ShapeSpec("sphere", "large"),)
    pile_size: int = 30
    success_target: int = 10
    max_trials: int = 500
    master_seed: int = 0
    policy: dict = field(default_factory=dict)
    out_dir: str | None = None
    container: dict = field(default_factory=dict)
    friction: dict = field(default_factory=dict)
    bucketing: dict = field(default_factory=dict)
    workers: int = 1
    keep_trajectory: bool = True
    profile: str = "quick"

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(parse_shape(s) for s in self.shapes))
        if not self.shapes:
            raise ConfigError("at least one shape is required")
        if self.pile_size < 1:
            raise ConfigError("pile_size must be at least 1")
        if self.success_target < 1:
            raise ConfigError("success_target must be at least 1")
        if self.max_trials != 0 and self.max_trials < self.success_target:
            raise ConfigError("max_trials must be >= success_target (or 0 for a dry run)")
        if self.max_trials < 0:
            raise ConfigError("max_trials must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        # Fail early on unknown or invalid nested keys.
        self.make_policy()
        self.make_container()
        self.make_friction()
        self.make_bucketing()

    def _build(self, cls, values, what):
        known = {f.name for f in fields(cls) if f.init}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
        try:
            return cls(**values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid {what}: {exc}") from None

    def make_policy(self):
        d = dict(self.policy)
        for key in ("th_base_range", "th_coupled_range"):
            if key in d:
                d[key] = tuple(d[key])
        return self._build(StochasticPolicy, d, "policy")

    def make_container(self):
        return self._build(Container, dict(self.container), "container")

    def make_friction(self):
        return self._build(FrictionModel, dict(self.friction), "friction")

    def make_bucketing(self):
        return self._build(Bucketing, dict(self.bucketing), "bucketing")

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self):
        return {
            "profile": self.profile,
            "shapes": [f"{s.kind}:{s.size_class}" for s in self.shapes],
            "pile_size": self.pile_size,
            "success_target": self.success_target,
            "max_trials": self.max_trials,
            "master_seed": self.master_seed,
            "policy": self.make_policy().to_dict(),
            "container": _container_dict(self.make_container()),
            "friction": {"mu": self.make_friction().mu, "k_edges": self.make_friction().k_edges},
            "bucketing": self.make_bucketing().to_dict(),
            "keep_trajectory": self.keep_trajectory,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        profile = d.pop("profile", "quick")
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
        values = {**PROFILES[profile], **d, "profile": profile}
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if "shapes" in values:
            values["shapes"] = tuple(values["shapes"])
        return cls(**values)


def _container_dict(c):
    return {"kind": c.kind, "radius": c.radius, "half_x": c.half_x, "half_y": c.half_y, "height": c.height}


def load_config(path):
    """Read an ``ExperimentConfig`` from a TOML file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return ExperimentConfig.from_dict(data)
