"""Rigid poses and convex primitive shapes.

All lengths are millimeters. Every shape is described in a local frame whose
origin is the shape's center of mass, and exposes a support function so that
generic convex distance queries (GJK/EPA) can be run on it.  Round shapes
(spheres, capsules, tori) are stored as a *core* plus a *margin*: the shape is
the set of points within ``margin`` of the core.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Pose",
    "quat_from_axis_angle",
    "quat_multiply",
    "quat_to_matrix",
    "random_quaternion",
    "Shape",
    "Point",
    "Sphere",
    "Capsule",
    "Box",
    "Cylinder",
    "Cone",
    "Hemisphere",
    "Polytope",
    "Torus",
]


def quat_to_matrix(q):
    """Rotation matrix of a unit quaternion given as (w, x, y, z)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    axis = axis / n
    s = math.sin(angle / 2.0)
    return np.array([math.cos(angle / 2.0), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_multiply(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def random_quaternion(rng):
    """Uniformly distributed unit quaternion drawn from ``rng``."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


class Pose:
    """Rigid transform: position in mm plus unit quaternion (w, x, y, z)."""

    __slots__ = ("position", "quaternion", "rotation")

    def __init__(self, position=(0.0, 0.0, 0.0), quaternion=(1.0, 0.0, 0.0, 0.0)):
        self.position = np.array(position, dtype=float)
        q = np.array(quaternion, dtype=float)
        n = np.linalg.norm(q)
        if n == 0.0:
            raise ValueError("zero quaternion")
        if abs(n - 1.0) > 1e-12:
            q = q / n
        self.quaternion = q
        self.rotation = quat_to_matrix(q)

    @classmethod
    def identity(cls):
        return cls()

    def apply(self, p):
        """Map local point(s) to world."""
        return np.asarray(p) @ self.rotation.T + self.position

    def apply_vector(self, v):
        return np.asarray(v) @ self.rotation.T

    def inverse_apply(self, p):
        """Map world point(s) to local."""
        return (np.asarray(p) - self.position) @ self.rotation

    def inverse_apply_vector(self, v):
        return np.asarray(v) @ self.rotation

    def compose(self, other):
        """Return ``self * other`` (apply ``other`` first)."""
        return Pose(self.apply(other.position), quat_multiply(self.quaternion, other.quaternion))

    def moved_to(self, position):
        """Same orientation at a new position (reuses the rotation matrix)."""
        p = Pose.__new__(Pose)
        p.position = np.asarray(position, dtype=float)
        p.quaternion = self.quaternion
        p.rotation = self.rotation
        return p

    def translated(self, delta):
        return Pose(self.position + np.asarray(delta, dtype=float), self.quaternion)

    def scaled(self, factor):
        return Pose(self.position * factor, self.quaternion)

    def __repr__(self):
        return f"Pose(position={self.position.tolist()}, quaternion={self.quaternion.tolist()})"


def _unit(d):
    n = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
    if n == 0.0:
        return np.array([1.0, 0.0, 0.0]), 0.0
    return d / n, n


class Shape:
    """Convex (or swept-convex) solid in its local frame."""

    kind = "shape"
    margin = 0.0

    def core_support(self, d):
        raise NotImplementedError

    def support(self, d):
        """Farthest point of the solid along local direction ``d``."""
        p = self.core_support(d)
        if self.margin:
            u, _ = _unit(np.asarray(d, dtype=float))
            p = p + self.margin * u
        return p

    @property
    def bounding_radius(self):
        raise NotImplementedError

    @property
    def characteristic_radius(self):
        """Length used to make torques commensurate with forces."""
        return self.bounding_radius

    @property
    def volume(self):
        raise NotImplementedError

    def params(self):
        return {}

    def scaled(self, factor):
        return type(self)(**{k: v * factor for k, v in self.params().items()})

    def key(self):
        return (self.kind,) + tuple(float(v) for v in self.params().values())

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


def _check_positive(**values):
    for name, v in values.items():
        if not v > 0:
            raise ValueError(f"{name} must be strictly positive, got {v!r}")


class Point(Shape):
    """Zero-volume point; used for point queries."""

    kind = "point"

    def core_support(self, d):
        return np.zeros(3)

    @property
    def bounding_radius(self):
        return 0.0

    @property
    def volume(self):
        return 0.0

    def scaled(self, factor):
        return Point()


class Sphere(Shape):
    kind = "sphere"

    def __init__(self, radius):
        _check_positive(radius=radius)
        self.radius = float(radius)
        self.margin = self.radius

    def core_support(self, d):
        return np.zeros(3)

    @property
    def bounding_radius(self):
        return self.radius

    @property
    def volume(self):
        return 4.0 / 3.0 * math.pi * self.radius**3

    def params(self):
        return {"radius": self.radius}


class Capsule(Shape):
    """Segment along local z from ``-half_length`` to ``+half_length``, swept by ``radius``."""

    kind = "capsule"

    def __init__(self, half_length, radius):
        _check_positive(half_length=half_length, radius=radius)
        self.half_length = float(half_length)
        self.radius = float(radius)
        self.margin = self.radius

    def core_support(self, d):
        return np.array([0.0, 0.0, self.half_length if d[2] >= 0 else -self.half_length])

    @property
    def bounding_radius(self):
        return self.half_length + self.radius

    @property
    def volume(self):
        r = self.radius
        return math.pi * r * r * 2 * self.half_length + 4.0 / 3.0 * math.pi * r**3

    def params(self):
        return {"half_length": self.half_length, "radius": self.radius}


class Box(Shape):
    kind = "box"

    def __init__(self, hx, hy, hz):
        _check_positive(hx=hx, hy=hy, hz=hz)
        self.half = np.array([hx, hy, hz], dtype=float)

    def core_support(self, d):
        return np.where(np.asarray(d) >= 0, self.half, -self.half)

    @property
    def bounding_radius(self):
        return float(np.linalg.norm(self.half))

    @property
    def volume(self):
        return float(8 * np.prod(self.half))

    def vertices(self):
        s = np.array([[i, j, k] for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)], dtype=float)
        return s * self.half

    def params(self):
        return {"hx": float(self.half[0]), "hy": float(self.half[1]), "hz": float(self.half[2])}


class Cylinder(Shape):
    """Axis along local z, centered."""

    kind = "cylinder"

    def __init__(self, radius, height):
        _check_positive(radius=radius, height=height)
        self.radius = float(radius)
        self.height = float(height)

    def core_support(self, d):
        dx, dy, dz = d
        rho = math.hypot(dx, dy)
        hh = 0.5 * self.height
        z = hh if dz >= 0 else -hh
        if rho < 1e-15:
            return np.array([0.0, 0.0, z])
        s = self.radius / rho
        return np.array([dx * s, dy * s, z])

    @property
    def bounding_radius(self):
        return math.hypot(self.radius, 0.5 * self.height)

    @property
    def volume(self):
        return math.pi * self.radius**2 * self.height

    def params(self):
        return {"radius": self.radius, "height": self.height}


class Cone(Shape):
    """Base disc at z = -h/4, apex at z = 3h/4 (origin at the centroid)."""

    kind = "cone"

    def __init__(self, radius, height):
        _check_positive(radius=radius, height=height)
        self.radius = float(radius)
        self.height = float(height)

    def core_support(self, d):
        dx, dy, dz = d
        apex = 0.75 * self.height
        base = -0.25 * self.height
        rho = math.hypot(dx, dy)
        rim = self.radius * rho + base * dz
        if apex * dz >= rim:
            return np.array([0.0, 0.0, apex])
        if rho < 1e-15:
            return np.array([0.0, 0.0, base])
        s = self.radius / rho
        return np.array([dx * s, dy * s, base])

    @property
    def bounding_radius(self):
        return max(0.75 * self.height, math.hypot(self.radius, 0.25 * self.height))

    @property
    def volume(self):
        return math.pi * self.radius**2 * self.height / 3.0

    def params(self):
        return {"radius": self.radius, "height": self.height}


class Hemisphere(Shape):
    """Dome up; flat face at z = -3r/8 so the origin is the centroid."""

    kind = "hemisphere"

    def __init__(self, radius):
        _check_positive(radius=radius)
        self.radius = float(radius)

    @property
    def _offset(self):
        return 3.0 * self.radius / 8.0

    def core_support(self, d):
        u, n = _unit(np.asarray(d, dtype=float))
        off = self._offset
        if u[2] >= 0:
            return self.radius * u - np.array([0.0, 0.0, off])
        rho = math.hypot(u[0], u[1])
        if rho < 1e-15:
            return np.array([0.0, 0.0, -off])
        return np.array([self.radius * u[0] / rho, self.radius * u[1] / rho, -off])

    @property
    def bounding_radius(self):
        return math.hypot(self.radius, self._offset)

    @property
    def volume(self):
        return 2.0 / 3.0 * math.pi * self.radius**3

    def params(self):
        return {"radius": self.radius}


class Polytope(Shape):
    """Convex hull of a vertex set, re-centered on its solid centroid."""

    kind = "polytope"

    def __init__(self, vertices, name="polytope"):
        from scipy.spatial import ConvexHull

        v = np.asarray(vertices, dtype=float)
        hull = ConvexHull(v)
        # Solid centroid via tetrahedra fan from an interior point.
        ref = v.mean(axis=0)
        vol = 0.0
        acc = np.zeros(3)
        for simplex in hull.simplices:
            a, b, c = v[simplex]
            t = abs(np.dot(a - ref, np.cross(b - ref, c - ref))) / 6.0
            vol += t
            acc += t * (a + b + c + ref) / 4.0
        centroid = acc / vol
        self.vertices = v[hull.vertices] - centroid
        self._volume = vol
        self.name = name

    def core_support(self, d):
        return self.vertices[np.argmax(self.vertices @ np.asarray(d))]

    @property
    def bounding_radius(self):
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    @property
    def volume(self):
        return self._volume

    def params(self):
        return {}

    def key(self):
        return (self.kind, self.name) + tuple(np.round(self.vertices, 12).ravel().tolist())

    def scaled(self, factor):
        return Polytope(self.vertices * factor, name=self.name)

    def __repr__(self):
        return f"Polytope(name={self.name!r}, n_vertices={len(self.vertices)})"


class Torus(Shape):
    """Circle of radius ``major`` in the local xy plane, swept by ``minor``.

    Not convex: ``support`` describes its convex hull, which is exact for
    half-space queries.  Pairwise distances use the parametric circle.
    """

    kind = "torus"

    def __init__(self, major, minor):
        _check_positive(major=major, minor=minor)
        if not minor < major:
            raise ValueError("torus minor radius must be smaller than major radius")
        self.major = float(major)
        self.minor = float(minor)
        self.margin = self.minor

    def core_support(self, d):
        rho = math.hypot(d[0], d[1])
        if rho < 1e-15:
            return np.array([self.major, 0.0, 0.0])
        return np.array([self.major * d[0] / rho, self.major * d[1] / rho, 0.0])

    def circle_point(self, phi):
        return np.array([self.major * math.cos(phi), self.major * math.sin(phi), 0.0])

    @property
    def bounding_radius(self):
        return self.major + self.minor

    @property
    def volume(self):
        return 2.0 * math.pi**2 * self.major * self.minor**2

    def params(self):
        return {"major": self.major, "minor": self.minor}
