"""Kinematics of a Barrett-like three-finger hand.

Seven joints: one spread angle shared (mirror-symmetrically) by fingers 1
and 2, plus a base and a coupled joint per finger.  The coupled joint is
slaved to the base joint at one third of its angle.  Finger 3 is fixed and
faces fingers 1 and 2 at zero spread.

Hand frame: origin at the center of the palm face, +z out of the palm along
the extended fingers, finger 3 on the -x side.  Angles are degrees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Capsule, Cylinder, Pose, quat_from_axis_angle

__all__ = [
    "COUPLING_RATIO",
    "JointLimitError",
    "JointLimits",
    "HandConfiguration",
    "HandGeometry",
    "HandLink",
    "PosedHand",
    "apply_coupling",
    "clamp_config",
    "forward_kinematics",
    "opposition_class",
]

COUPLING_RATIO = 1.0 / 3.0


class JointLimitError(ValueError):
    """A joint value lies outside its configured interval."""


@dataclass(frozen=True)
class JointLimits:
    spread: tuple[float, float] = (0.0, 180.0)
    base: tuple[float, float] = (0.0, 140.0)

    def __post_init__(self):
        for name in ("spread", "base"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} limits are inverted: {lo} > {hi}")


@dataclass(frozen=True)
class HandConfiguration:
    """Joint state.  ``coupled`` is derived, so the 1/3 coupling always holds."""

    spread: float = 0.0
    base: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "spread", float(self.spread))
        object.__setattr__(self, "base", tuple(float(b) for b in self.base))

    @property
    def coupled(self):
        return tuple(b / 3 for b in self.base)

    def joints(self):
        """All seven joint values: spread, base[3], coupled[3]."""
        return (self.spread,) + self.base + self.coupled

    def with_base(self, finger, value):
        base = list(self.base)
        base[finger] = float(value)
        return replace(self, base=tuple(base))

    def is_valid(self, limits=JointLimits()):
        lo, hi = limits.spread
        if not lo <= self.spread <= hi:
            return False
        lo, hi = limits.base
        return all(lo <= b <= hi for b in self.base)


def apply_coupling(base, limits=JointLimits()):
    """Coupled-joint angle driven by a base-joint angle."""
    lo, hi = limits.base
    if not lo <= base <= hi:
        raise JointLimitError(f"base angle {base} outside [{lo}, {hi}]")
    return base / 3


def clamp_config(config, limits=JointLimits()):
    spread = min(max(config.spread, limits.spread[0]), limits.spread[1])
    lo, hi = limits.base
    return HandConfiguration(spread, tuple(min(max(b, lo), hi) for b in config.base))


def opposition_class(config, band=45.0):
    """'opposed', 'same-side' or 'neutral' from the spread angle.

    Fingers 1 and 2 face finger 3 when the spread is within ``band`` degrees of
    0, and flex the same way as finger 3 within ``band`` of 180.
    """
    if config.spread <= band:
        return "opposed"
    if config.spread >= 180.0 - band:
        return "same-side"
    return "neutral"


@dataclass(frozen=True)
class HandGeometry:
    """Dimensions in millimeters.  Defaults approximate a commercial hand."""

    palm_radius: float = 45.0
    palm_thickness: float = 30.0
    finger_offset_x: float = 25.0
    finger_offset_y: float = 25.0
    proximal_length: float = 70.0
    distal_length: float = 58.0
    link_radius: float = 12.0
    tip_fraction: float = 0.25
    side_band: float = 60.0
    n_fingers: int = field(default=3, init=False)

    def __post_init__(self):
        for name in ("palm_radius", "palm_thickness", "proximal_length", "distal_length", "link_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0 < self.tip_fraction < 1:
            raise ValueError("tip_fraction must lie in (0, 1)")
        if not 0 < self.side_band < 180:
            raise ValueError("side_band must lie in (0, 180) degrees")

    def finger_bases(self):
        x, y = self.finger_offset_x, self.finger_offset_y
        return np.array([[x, y, 0.0], [x, -y, 0.0], [-x, 0.0, 0.0]])

    def flex_directions(self, spread):
        s = math.radians(spread)
        return np.array(
            [[-math.cos(s), -math.sin(s), 0.0], [-math.cos(s), math.sin(s), 0.0], [1.0, 0.0, 0.0]]
        )

    def scaled(self, factor):
        return replace(
            self,
            palm_radius=self.palm_radius * factor,
            palm_thickness=self.palm_thickness * factor,
            finger_offset_x=self.finger_offset_x * factor,
            finger_offset_y=self.finger_offset_y * factor,
            proximal_length=self.proximal_length * factor,
            distal_length=self.distal_length * factor,
            link_radius=self.link_radius * factor,
        )

    def to_dict(self):
        return {
            "palm_radius": self.palm_radius,
            "palm_thickness": self.palm_thickness,
            "finger_offset_x": self.finger_offset_x,
            "finger_offset_y": self.finger_offset_y,
            "proximal_length": self.proximal_length,
            "distal_length": self.distal_length,
            "link_radius": self.link_radius,
            "tip_fraction": self.tip_fraction,
            "side_band": self.side_band,
        }


@dataclass
class HandLink:
    """One rigid body of the posed hand, in world coordinates.

    For finger links ``start``/``end`` are the capsule core endpoints,
    ``joint_axis`` passes through ``joint_point``, and ``palmar`` is the unit
    direction the link's pad faces (its direction of motion when flexing).
    """

    name: str
    finger: int | None
    segment: str
    shape: object
    pose: Pose
    start: np.ndarray | None = None
    end: np.ndarray | None = None
    joint_point: np.ndarray | None = None
    joint_axis: np.ndarray | None = None
    palmar: np.ndarray | None = None

    @property
    def length(self):
        return float(np.linalg.norm(self.end - self.start)) if self.start is not None else 0.0

    @property
    def direction(self):
        d = self.end - self.start
        return d / np.linalg.norm(d)


@dataclass
class PosedHand:
    config: HandConfiguration
    geometry: HandGeometry
    wrist_pose: Pose
    links: list

    def link(self, name):
        for lk in self.links:
            if lk.name == name:
                return lk
        raise KeyError(name)

    @property
    def palm(self):
        return self.links[0]

    def finger_links(self, finger):
        return [lk for lk in self.links if lk.finger == finger]

    def fingertip(self, finger):
        """World position of the end of the distal core segment."""
        return self.link(f"f{finger}.distal").end

    def palm_normal(self):
        return self.wrist_pose.apply_vector([0.0, 0.0, 1.0])


def _link_direction(theta, u):
    return math.cos(theta) * np.array([0.0, 0.0, 1.0]) + math.sin(theta) * u


def _palmar_direction(theta, u):
    return -math.sin(theta) * np.array([0.0, 0.0, 1.0]) + math.cos(theta) * u


def forward_kinematics(config, geometry=HandGeometry(), wrist_pose=None):
    """World poses of the palm and the six finger capsules."""
    wrist = wrist_pose if wrist_pose is not None else Pose.identity()
    g = geometry
    links = []
    palm_local = Pose([0.0, 0.0, -0.5 * g.palm_thickness])
    links.append(
        HandLink("palm", None, "palm", Cylinder(g.palm_radius, g.palm_thickness), wrist.compose(palm_local))
    )
    bases = g.finger_bases()
    dirs = g.flex_directions(config.spread)
    z = np.array([0.0, 0.0, 1.0])
    for i in range(3):
        u = dirs[i]
        axis = np.cross(z, u)
        theta_b = math.radians(config.base[i])
        theta_d = theta_b + math.radians(config.coupled[i])
        segments = (
            ("proximal", bases[i], theta_b, g.proximal_length),
            (
                "distal",
                bases[i] + g.proximal_length * _link_direction(theta_b, u),
                theta_d,
                g.distal_length,
            ),
        )
        for seg, start, theta, length in segments:
            end = start + length * _link_direction(theta, u)
            mid = 0.5 * (start + end)
            local = Pose(mid, quat_from_axis_angle(axis, theta))
            links.append(
                HandLink(
                    name=f"f{i + 1}.{seg}",
                    finger=i + 1,
                    segment=seg,
                    shape=Capsule(0.5 * length, g.link_radius),
                    pose=wrist.compose(local),
                    start=wrist.apply(start),
                    end=wrist.apply(end),
                    joint_point=wrist.apply(start),
                    joint_axis=wrist.apply_vector(axis),
                    palmar=wrist.apply_vector(_palmar_direction(theta, u)),
                )
            )
    return PosedHand(config, geometry, wrist, links)
