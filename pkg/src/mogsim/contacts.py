"""Hand/object contacts, hand-surface regions, taxels and the torque proxy."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scene import pair_distance

__all__ = [
    "REGIONS",
    "GeometryError",
    "ContactPoint",
    "TaxelGrid",
    "detect_contacts",
    "label_region",
    "taxel_map",
    "torque_proxy",
]

REGIONS = ("fingertip", "finger-link", "finger-side", "palm")
PALM_SHAPE = (4, 6)
FINGER_SHAPE = (3, 8)


class GeometryError(ValueError):
    """A point that should lie on the hand surface does not."""


@dataclass
class ContactPoint:
    """One contact between two bodies.

    ``body_a`` receives the contact force along ``normal``: for hand
    contacts ``body_a`` is the object id and ``body_b`` the link name; for
    object pairs ``normal`` points from ``body_b`` into ``body_a``.  Container
    contacts use the string ``"container"`` as ``body_b``.
    """

    body_a: object
    body_b: object
    point: np.ndarray
    normal: np.ndarray
    depth: float
    region: str = "object"
    finger: int | None = None
    segment: str | None = None
    arms: tuple = (0.0, 0.0)
    taxel: tuple | None = None

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        n = np.asarray(self.normal, dtype=float)
        self.normal = n / np.linalg.norm(n)
        self.depth = max(float(self.depth), 0.0)

    @property
    def is_hand(self):
        return self.region != "object"

    @property
    def pair(self):
        return (self.body_a, self.body_b)

    def to_dict(self):
        d = {
            "body_a": self.body_a,
            "body_b": self.body_b,
            "point": [float(v) for v in self.point],
            "normal": [float(v) for v in self.normal],
            "depth": float(self.depth),
            "region": self.region,
        }
        if self.finger is not None:
            d["finger"] = self.finger
            d["segment"] = self.segment
            d["arms"] = [float(a) for a in self.arms]
        if self.taxel is not None:
            d["taxel"] = list(self.taxel)
        return d

    @classmethod
    def from_dict(cls, d):
        taxel = d.get("taxel")
        return cls(
            body_a=d["body_a"],
            body_b=d["body_b"],
            point=np.array(d["point"], dtype=float),
            normal=np.array(d["normal"], dtype=float),
            depth=float(d["depth"]),
            region=d.get("region", "object"),
            finger=d.get("finger"),
            segment=d.get("segment"),
            arms=tuple(d.get("arms", (0.0, 0.0))),
            taxel=tuple(taxel) if taxel is not None else None,
        )


@dataclass
class TaxelGrid:
    """Pressure proxy per tactile cell: palm 4 x 6, each finger 3 x 8."""

    palm: np.ndarray = field(default_factory=lambda: np.zeros(PALM_SHAPE))
    fingers: np.ndarray = field(default_factory=lambda: np.zeros((3,) + FINGER_SHAPE))

    def flat(self):
        """96 values, row-major: palm, finger 1, finger 2, finger 3."""
        return np.concatenate([self.palm.ravel(), self.fingers.reshape(3, -1).ravel()])

    @classmethod
    def from_flat(cls, values):
        v = np.asarray(values, dtype=float)
        if v.shape != (96,):
            raise ValueError(f"taxel vector must have 96 entries, got {v.shape}")
        return cls(v[:24].reshape(PALM_SHAPE).copy(), v[24:].reshape((3,) + FINGER_SHAPE).copy())

    def total(self):
        return float(self.palm.sum() + self.fingers.sum())


def _axis_distance(point, origin, axis):
    rel = point - origin
    a = axis / np.linalg.norm(axis)
    perp = rel - (rel @ a) * a
    return float(np.linalg.norm(perp))


def _link_frame(link, point):
    """Axial coordinate and radial offset of ``point`` relative to a capsule core."""
    d = link.end - link.start
    L = float(np.linalg.norm(d))
    u = d / L
    rel = point - link.start
    t = float(rel @ u)
    closest = link.start + min(max(t, 0.0), L) * u
    radial = point - closest
    return t, L, u, radial


def label_region(link, point, geometry=None, tol=None):
    """Region of the hand surface containing ``point`` on ``link``.

    Raises ``GeometryError`` when the point is farther than ``tol`` from the
    link surface (default: 10% of the link radius, at least 0.5 mm).
    """
    return _classify(link, np.asarray(point, dtype=float), geometry, tol)[0]


def _classify(link, point, geometry, tol):
    tip_fraction = getattr(geometry, "tip_fraction", 0.25)
    side_band = getattr(geometry, "side_band", 60.0)
    if link.segment == "palm":
        shape, pose = link.shape, link.pose
        local = pose.inverse_apply(point)
        r = math.hypot(local[0], local[1])
        hh = 0.5 * shape.height
        off_side = r - shape.radius
        off_cap = abs(local[2]) - hh
        if off_side <= 0 and off_cap <= 0:
            gap = max(off_side, off_cap)
        else:
            gap = math.hypot(max(off_side, 0.0), max(off_cap, 0.0))
        limit = tol if tol is not None else max(0.5, 0.1 * shape.radius)
        if abs(gap) > limit:
            raise GeometryError(f"point is {gap:.3f} mm from the palm surface")
        return "palm", local
    t, L, u, radial = _link_frame(link, point)
    radius = link.shape.radius
    limit = tol if tol is not None else max(0.5, 0.1 * radius)
    rn = float(np.linalg.norm(radial))
    if abs(rn - radius) > limit:
        raise GeometryError(f"point is {rn - radius:.3f} mm from the {link.name} surface")
    if link.segment == "distal" and t >= (1.0 - tip_fraction) * L:
        return "fingertip", (t, L, u, radial)
    if rn < 1e-9 or (t < 0 or t > L) and np.linalg.norm(radial - (radial @ u) * u) < 0.5 * rn:
        # End caps away from the tip count as link surface.
        return "finger-link", (t, L, u, radial)
    lateral = radial - (radial @ u) * u
    cosang = float(lateral @ link.palmar) / float(np.linalg.norm(lateral))
    ang = math.degrees(math.acos(min(max(cosang, -1.0), 1.0)))
    return ("finger-side" if ang > side_band else "finger-link"), (t, L, u, radial)


def _palm_cell(local, shape):
    R = shape.radius
    col = int(np.clip(math.floor((local[0] + R) / (2 * R) * PALM_SHAPE[1]), 0, PALM_SHAPE[1] - 1))
    row = int(np.clip(math.floor((local[1] + R) / (2 * R) * PALM_SHAPE[0]), 0, PALM_SHAPE[0] - 1))
    return row, col


def _finger_cell(link, frame, side_band):
    t, L, u, radial = frame
    along = int(np.clip(math.floor(t / L * 4), 0, 3)) + (4 if link.segment == "distal" else 0)
    lateral = radial - (radial @ u) * u
    ln = float(np.linalg.norm(lateral))
    if ln < 1e-12:
        return 1, along
    lateral = lateral / ln
    side = float(np.cross(link.palmar, lateral) @ u)
    ang = math.degrees(math.atan2(side, float(lateral @ link.palmar)))
    width = 2.0 * side_band / FINGER_SHAPE[0]
    across = int(np.clip(math.floor((ang + side_band) / width), 0, FINGER_SHAPE[0] - 1))
    return across, along


def detect_contacts(hand, scene, threshold=0.0, include_objects=True, include_container=True):
    """Contacts between hand links, objects and the container.

    One ``ContactPoint`` per pair of bodies closer than ``threshold``.  Hand
    contacts carry their region label, taxel cell and moment arms about the
    finger's base and coupled joint axes.
    """
    geometry = hand.geometry
    contacts = []
    objs = scene.objects
    links_by_finger = {}
    for lk in hand.links:
        if lk.finger is not None:
            links_by_finger.setdefault(lk.finger, {})[lk.segment] = lk

    def hand_contact(link, body, res_point, normal, depth):
        region, frame = _classify(link, res_point, geometry, tol=max(1.0, 0.5 * depth + 0.5))
        if region == "palm":
            return ContactPoint(body, link.name, res_point, normal, depth, "palm", taxel=("palm",) + _palm_cell(frame, link.shape))
        chain = links_by_finger[link.finger]
        arm_base = _axis_distance(res_point, chain["proximal"].joint_point, chain["proximal"].joint_axis)
        arm_coupled = 0.0
        if link.segment == "distal":
            arm_coupled = _axis_distance(res_point, link.joint_point, link.joint_axis)
        cell = _finger_cell(link, frame, geometry.side_band)
        return ContactPoint(body, link.name, res_point, normal, depth, region, link.finger, link.segment,
                            (arm_base, arm_coupled), (f"f{link.finger}",) + cell)

    for lk in hand.links:
        rl = lk.shape.bounding_radius
        for o in objs:
            if np.linalg.norm(o.position - lk.pose.position) > rl + o.shape.bounding_radius + max(threshold, 0.0):
                continue
            res = pair_distance(o.shape, o.pose, lk.shape, lk.pose)
            if res.distance < threshold:
                contacts.append(hand_contact(lk, o.id, res.point_b, res.normal, -res.distance))
        if include_container:
            for res in scene.container.distances(lk.shape, lk.pose):
                if res.distance < threshold:
                    # The force on the hand points into the container interior.
                    contacts.append(hand_contact(lk, "container", res.point_a, -res.normal, -res.distance))
    if include_objects:
        for i, a in enumerate(objs):
            for b in objs[i + 1:]:
                if np.linalg.norm(a.position - b.position) > a.shape.bounding_radius + b.shape.bounding_radius + max(threshold, 0.0):
                    continue
                res = pair_distance(a.shape, a.pose, b.shape, b.pose)
                if res.distance < threshold:
                    contacts.append(ContactPoint(a.id, b.id, 0.5 * (res.point_a + res.point_b), res.normal, -res.distance))
    return contacts


def taxel_map(contacts, k_t=1.0):
    """Deposit ``k_t * depth`` of every hand contact into its taxel cell."""
    grid = TaxelGrid()
    for c in contacts:
        if c.taxel is None:
            continue
        pad, row, col = c.taxel
        if pad == "palm":
            grid.palm[row, col] += k_t * c.depth
        else:
            grid.fingers[int(pad[1:]) - 1, row, col] += k_t * c.depth
    return grid


def torque_proxy(contacts, finger, joint, k=1.0):
    """``k * sum(depth * moment arm)`` about a finger joint.

    ``joint`` is ``"base"`` (contacts on both links of the finger) or
    ``"coupled"`` (contacts on the distal link only).
    """
    if joint not in ("base", "coupled"):
        raise ValueError(f"unknown joint {joint!r}")
    total = 0.0
    for c in contacts:
        if c.finger != finger:
            continue
        if joint == "base":
            total += c.depth * c.arms[0]
        elif c.segment == "distal":
            total += c.depth * c.arms[1]
    return k * total
