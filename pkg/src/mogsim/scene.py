"""Object catalog, container and quasi-static pile generation.

Piles are built by sequential drop-and-project: each object falls along
gravity until it touches something, then slides under small gravity nudges
while penetrations are projected out along contact normals (a position-based
relaxation, no velocities).  Objects translate only; their orientation is
drawn once per drop attempt.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _pbd
from .distance import DistanceResult, signed_distance
from .geometry import (
    Box,
    Capsule,
    Cone,
    Cylinder,
    Hemisphere,
    Polytope,
    Pose,
    Sphere,
    Torus,
    random_quaternion,
)

__all__ = [
    "SHAPE_KINDS",
    "SIZE_CLASSES",
    "PlacementError",
    "ShapeSpec",
    "make_shape",
    "default_params",
    "Container",
    "ObjectInstance",
    "SceneState",
    "Penetration",
    "pair_distance",
    "relax",
    "drop_object",
    "settle_pile",
    "penetration_set",
    "scene_to_text",
    "scene_from_text",
]

SHAPE_KINDS = (
    "sphere",
    "hemisphere",
    "cuboid",
    "cone",
    "square_pyramid",
    "triangular_pyramid",
    "cylinder",
    "hexagonal_prism",
    "triangular_prism",
    "rectangular_prism",
    "torus",
)

# Characteristic length (overall extent) of each size class, mm.
SIZE_CLASSES = {"small": 15.0, "large": 30.0}

SETTLE_TOL = 0.1
SLOP = 1e-3
_OMEGA = 1.5


class PlacementError(RuntimeError):
    """An object could not be placed within the attempt budget."""


def _prism(polygon, length):
    polygon = np.asarray(polygon, dtype=float)
    lo = np.column_stack([polygon, np.full(len(polygon), -0.5 * length)])
    hi = np.column_stack([polygon, np.full(len(polygon), 0.5 * length)])
    return np.vstack([lo, hi])


def _regular_polygon(n, circumradius):
    a = 2 * np.pi * np.arange(n) / n
    return circumradius * np.column_stack([np.cos(a), np.sin(a)])


def default_params(kind, length):
    """Size parameters of ``kind`` with overall extent ``length`` (mm)."""
    h = 0.5 * length
    table = {
        "sphere": {"radius": h},
        "hemisphere": {"radius": h},
        "cuboid": {"edge": length},
        "cone": {"radius": h, "height": length},
        "square_pyramid": {"base": length, "height": length},
        "triangular_pyramid": {"edge": length},
        "cylinder": {"radius": h, "height": length},
        "hexagonal_prism": {"radius": h, "height": length},
        "triangular_prism": {"side": length, "length": length},
        "rectangular_prism": {"x": length, "y": 0.6 * length, "z": 0.4 * length},
        "torus": {"major": 0.35 * length, "minor": 0.15 * length},
    }
    if kind not in table:
        raise ValueError(f"unknown shape kind {kind!r}")
    return table[kind]


def make_shape(kind, params):
    """Build the primitive for ``kind`` from its size parameters (mm)."""
    p = {k: float(v) for k, v in params.items()}
    for k, v in p.items():
        if not v > 0:
            raise ValueError(f"{kind}: parameter {k} must be strictly positive, got {v}")
    try:
        if kind == "sphere":
            return Sphere(p["radius"])
        if kind == "hemisphere":
            return Hemisphere(p["radius"])
        if kind == "cuboid":
            e = 0.5 * p["edge"]
            return Box(e, e, e)
        if kind == "rectangular_prism":
            return Box(0.5 * p["x"], 0.5 * p["y"], 0.5 * p["z"])
        if kind == "cone":
            return Cone(p["radius"], p["height"])
        if kind == "cylinder":
            return Cylinder(p["radius"], p["height"])
        if kind == "torus":
            return Torus(p["major"], p["minor"])
        if kind == "square_pyramid":
            b = 0.5 * p["base"]
            v = [[b, b, 0], [b, -b, 0], [-b, -b, 0], [-b, b, 0], [0, 0, p["height"]]]
            return Polytope(v, name=kind)
        if kind == "triangular_pyramid":
            e = p["edge"]
            base = _regular_polygon(3, e / math.sqrt(3.0))
            v = np.vstack([np.column_stack([base, np.zeros(3)]), [[0, 0, e * math.sqrt(2.0 / 3.0)]]])
            return Polytope(v, name=kind)
        if kind == "hexagonal_prism":
            return Polytope(_prism(_regular_polygon(6, p["radius"]), p["height"]), name=kind)
        if kind == "triangular_prism":
            return Polytope(_prism(_regular_polygon(3, p["side"] / math.sqrt(3.0)), p["length"]), name=kind)
    except KeyError as exc:
        raise ValueError(f"{kind}: missing size parameter {exc.args[0]!r}") from None
    raise ValueError(f"unknown shape kind {kind!r}")


@dataclass(frozen=True)
class ShapeSpec:
    """A shape kind in a size class, optionally with explicit parameters."""

    kind: str = "sphere"
    size_class: str = "small"
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.size_class not in SIZE_CLASSES:
            raise ValueError(f"unknown size class {self.size_class!r}")
        if isinstance(self.params, dict):
            object.__setattr__(self, "params", tuple(sorted(self.params.items())))

    def resolved_params(self):
        if self.params:
            return dict(self.params)
        return default_params(self.kind, SIZE_CLASSES[self.size_class])

    def shape(self):
        return make_shape(self.kind, self.resolved_params())

    @property
    def label(self):
        return f"{self.kind}-{self.size_class}"


@dataclass
class ObjectInstance:
    id: int
    kind: str
    params: dict
    position: np.ndarray
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    size_class: str = "small"

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        q = np.asarray(self.quaternion, dtype=float)
        n = np.linalg.norm(q)
        if n == 0:
            raise ValueError("zero quaternion")
        self.quaternion = q / n if abs(n - 1.0) > 1e-12 else q
        self._shape = None
        self._pose = None

    @property
    def shape(self):
        if self._shape is None:
            self._shape = make_shape(self.kind, self.params)
        return self._shape

    @property
    def pose(self):
        if self._pose is None:
            self._pose = Pose(self.position, self.quaternion)
        elif self._pose.position is not self.position:
            self._pose = self._pose.moved_to(self.position)
        return self._pose

    def moved(self, position):
        obj = ObjectInstance(self.id, self.kind, dict(self.params), np.array(position, dtype=float),
                             self.quaternion, self.size_class)
        obj._shape = self._shape
        if self._pose is not None:
            obj._pose = self._pose.moved_to(obj.position)
        return obj

    def copy(self):
        return self.moved(self.position.copy())


@dataclass(frozen=True)
class Container:
    """Open-top container with its floor at z = 0.

    ``kind`` is ``"bowl"`` (vertical cylindrical wall of ``radius``) or
    ``"box"`` (walls at x = +-half_x, y = +-half_y).
    """

    kind: str = "bowl"
    radius: float = 60.0
    half_x: float = 75.0
    half_y: float = 75.0
    height: float = 100.0

    def __post_init__(self):
        if self.kind not in ("bowl", "box"):
            raise ValueError(f"unknown container kind {self.kind!r}")
        for name in ("radius", "half_x", "half_y", "height"):
            if not getattr(self, name) > 0:
                raise ValueError(f"container {name} must be strictly positive")

    @property
    def volume(self):
        if self.kind == "bowl":
            return math.pi * self.radius**2 * self.height
        return 4.0 * self.half_x * self.half_y * self.height

    def sample_xy(self, rng, margin):
        """Uniform point of the floor at least ``margin`` from the walls."""
        if self.kind == "bowl":
            r = max(self.radius - margin, 0.0) * math.sqrt(rng.random())
            a = 2 * math.pi * rng.random()
            return np.array([r * math.cos(a), r * math.sin(a)])
        return np.array(
            [
                rng.uniform(-1, 1) * max(self.half_x - margin, 0.0),
                rng.uniform(-1, 1) * max(self.half_y - margin, 0.0),
            ]
        )

    def _walls(self, center):
        """Outward unit wall normals and wall offsets relevant to ``center``."""
        if self.kind == "bowl":
            rho = math.hypot(center[0], center[1])
            u = np.array([1.0, 0.0, 0.0]) if rho < 1e-12 else np.array([center[0] / rho, center[1] / rho, 0.0])
            return [(u, self.radius)]
        return [
            (np.array([1.0, 0.0, 0.0]), self.half_x),
            (np.array([-1.0, 0.0, 0.0]), self.half_x),
            (np.array([0.0, 1.0, 0.0]), self.half_y),
            (np.array([0.0, -1.0, 0.0]), self.half_y),
        ]

    def distances(self, shape, pose):
        """Signed distances of a posed body to the floor and walls.

        Walls end at the rim: a body whose outermost point toward a wall lies
        above ``height`` gets no contact with it.

        Returns a list of ``DistanceResult`` with the body as ``a`` and the
        container as ``b`` (normal points into the container interior).  The
        bowl wall distance is exact for bodies whose support is radially
        symmetric about their center (spheres) and a close approximation
        otherwise.
        """
        out = []
        c = pose.position
        if type(shape) is Sphere:
            r = shape.radius
            p = np.array([c[0], c[1], c[2] - r])
            out.append(DistanceResult(float(p[2]), p, np.array([c[0], c[1], 0.0]), np.array([0.0, 0.0, 1.0])))
            for u, offset in self._walls(c):
                if c[2] > self.height:
                    continue
                d = offset - float(c @ u) - r
                out.append(DistanceResult(d, c + r * u, c + (r + d) * u, -u))
            return out
        R = pose.rotation
        down = np.array([0.0, 0.0, -1.0])
        p = R @ shape.support(R.T @ down) + c
        out.append(DistanceResult(float(p[2]), p, np.array([p[0], p[1], 0.0]), -down))
        for u, offset in self._walls(c):
            p = R @ shape.support(R.T @ u) + c
            if p[2] > self.height:
                continue
            d = offset - float(p @ u)
            q = p + d * u
            out.append(DistanceResult(d, p, q, -u))
        return out

    def contains_xy(self, point, tol=0.0):
        if self.kind == "bowl":
            return math.hypot(point[0], point[1]) <= self.radius + tol
        return abs(point[0]) <= self.half_x + tol and abs(point[1]) <= self.half_y + tol

    def to_text(self):
        if self.kind == "bowl":
            return f"container bowl radius={self.radius!r} height={self.height!r}"
        return f"container box half_x={self.half_x!r} half_y={self.half_y!r} height={self.height!r}"


@dataclass
class SceneState:
    container: Container
    objects: list
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))

    def __post_init__(self):
        g = np.asarray(self.gravity, dtype=float)
        self.gravity = g / np.linalg.norm(g)

    def copy(self):
        return SceneState(self.container, [o.copy() for o in self.objects], self.gravity.copy())

    def positions(self):
        if not self.objects:
            return np.zeros((0, 3))
        return np.array([o.position for o in self.objects])

    def with_positions(self, positions):
        objs = [o.moved(p) for o, p in zip(self.objects, positions)]
        return SceneState(self.container, objs, self.gravity.copy())

    def object(self, obj_id):
        for o in self.objects:
            if o.id == obj_id:
                return o
        raise KeyError(obj_id)

    def top_height(self):
        if not self.objects:
            return 0.0
        return max(float(o.position[2]) + o.shape.bounding_radius for o in self.objects)

    def max_penetration(self):
        """Deepest object-object or object-container penetration (>= 0)."""
        worst = 0.0
        objs = self.objects
        for i, a in enumerate(objs):
            for res in self.container.distances(a.shape, a.pose):
                worst = max(worst, -res.distance)
            for b in objs[i + 1:]:
                if np.linalg.norm(a.position - b.position) > a.shape.bounding_radius + b.shape.bounding_radius:
                    continue
                worst = max(worst, -pair_distance(a.shape, a.pose, b.shape, b.pose).distance)
        return worst

    def to_text(self):
        return scene_to_text(self)

    @classmethod
    def from_text(cls, text):
        return scene_from_text(text)


def pair_distance(sa, pa, sb, pb):
    """``signed_distance`` with an inline fast path for sphere pairs."""
    if type(sa) is Sphere and type(sb) is Sphere:
        delta = pa.position - pb.position
        dist = math.sqrt(float(delta @ delta))
        n = delta / dist if dist > 1e-12 else np.array([0.0, 0.0, 1.0])
        return DistanceResult(dist - sa.radius - sb.radius, pa.position - sa.radius * n,
                              pb.position + sb.radius * n, n)
    return signed_distance(sa, pa, sb, pb)


def _poses(objects, positions):
    return [o.pose.moved_to(p) for o, p in zip(objects, positions)]


def _sphere_obstacle(P, rad, shape, pose):
    """Signed distances and unit normals (obstacle -> sphere) for many spheres."""
    if type(shape) is Capsule:
        axis = pose.rotation[:, 2] * shape.half_length
        a = pose.position - axis
        ab = 2.0 * axis
        t = np.clip((P - a) @ ab / float(ab @ ab), 0.0, 1.0)
        diff = P - (a + t[:, None] * ab)
        dist = np.linalg.norm(diff, axis=1)
        n = diff / np.maximum(dist, 1e-12)[:, None]
        return dist - rad - shape.radius, n
    if type(shape) is Sphere:
        diff = P - pose.position
        dist = np.linalg.norm(diff, axis=1)
        return dist - rad - shape.radius, diff / np.maximum(dist, 1e-12)[:, None]
    if type(shape) is Cylinder:
        q = (P - pose.position) @ pose.rotation
        R, hh = shape.radius, 0.5 * shape.height
        rho = np.hypot(q[:, 0], q[:, 1])
        safe = np.maximum(rho, 1e-12)
        radial = np.column_stack([q[:, 0] / safe, q[:, 1] / safe, np.zeros(len(q))])
        radial[rho <= 1e-12] = [1.0, 0.0, 0.0]
        cr = np.minimum(rho, R)
        closest = np.column_stack([radial[:, 0] * cr, radial[:, 1] * cr, np.clip(q[:, 2], -hh, hh)])
        diff = q - closest
        dist = np.linalg.norm(diff, axis=1)
        n = diff / np.maximum(dist, 1e-12)[:, None]
        d = dist.copy()
        inside = (rho <= R) & (np.abs(q[:, 2]) <= hh)
        if inside.any():
            side_gap = R - rho[inside]
            cap_gap = hh - np.abs(q[inside, 2])
            use_side = side_gap < cap_gap
            d[inside] = -np.where(use_side, side_gap, cap_gap)
            cap_n = np.zeros((int(inside.sum()), 3))
            cap_n[:, 2] = np.where(q[inside, 2] >= 0, 1.0, -1.0)
            n[inside] = np.where(use_side[:, None], radial[inside], cap_n)
        return d - rad, n @ pose.rotation.T
    return None


def _capsule_batch(obstacles):
    caps = [(s, p) for s, p in obstacles if type(s) is Capsule]
    if not caps:
        return None
    axes = np.array([p.rotation[:, 2] * s.half_length for s, p in caps])
    A = np.array([p.position for _, p in caps]) - axes
    AB = 2.0 * axes
    return A, AB, np.einsum("ij,ij->i", AB, AB), np.array([s.radius for s, _ in caps])


def _capsules_spheres(P, rad, batch):
    A, AB, L2, rc = batch
    rel = P[:, None, :] - A[None, :, :]
    t = np.clip(np.einsum("mkj,kj->mk", rel, AB) / L2, 0.0, 1.0)
    diff = rel - t[:, :, None] * AB[None, :, :]
    dist = np.sqrt(np.einsum("mkj,mkj->mk", diff, diff))
    n = diff / np.maximum(dist, 1e-12)[:, :, None]
    return dist - rad[:, None] - rc[None, :], n


def _scatter(values, index, n):
    return np.column_stack([np.bincount(index, values[:, k], minlength=n) for k in range(3)])


def _relax_spheres(objects, pos, container, obstacles, mov, iterations, g, nudge, slop, tol, mu):
    """Vectorized relaxation for sphere-only piles.

    Obstacles and the container are projected for all spheres at once;
    sphere pairs are projected Jacobi-style (averaged per sphere).  Gravity
    nudges skip spheres resting on a surface within the friction angle.
    """
    rad = np.array([o.shape.radius for o in objects])
    n = len(objects)
    idx = np.flatnonzero(mov)
    r = rad[idx]
    cos_stick = 1.0 / math.sqrt(1.0 + mu * mu) if mu > 0 else 1.0 + 1e-9
    up = -g
    caps = _capsule_batch(obstacles)
    others = [(s, p) for s, p in obstacles if type(s) is not Capsule]
    ii, jj = np.triu_indices(n, 1)
    keep = mov[ii] | mov[jj]
    ii, jj = ii[keep], jj[keep]
    both = mov[ii] & mov[jj]
    wi = np.where(both, 0.5, 1.0) * mov[ii]
    wj = np.where(both, 0.5, 1.0) * mov[jj]
    rsum = rad[ii] + rad[jj]
    resting = np.zeros(n, dtype=bool)
    for _ in range(iterations):
        start = pos.copy()
        support = np.full(n, -1.0)
        if nudge:
            pos[(~resting) & mov] += nudge * g
        P = pos[idx]
        sup = np.full(len(idx), -1.0)
        for res_d, res_n in _container_spheres(container, P, r):
            hit = res_d < -slop
            P[hit] += (-slop - res_d[hit])[:, None] * res_n[hit]
            near = res_d < 2 * slop
            sup[near] = np.maximum(sup[near], res_n[near] @ up)
        if caps is not None:
            d, nn = _capsules_spheres(P, r, caps)
            push = np.clip(-slop - d, 0.0, None)
            P += np.einsum("mk,mkj->mj", push, nn)
            near = d < 2 * slop
            if near.any():
                sup = np.maximum(sup, np.where(near, nn @ up, -1.0).max(axis=1))
        for shape, opose in others:
            d, nn = _sphere_obstacle(P, r, shape, opose)
            hit = d < -slop
            P[hit] += (-slop - d[hit])[:, None] * nn[hit]
            near = d < 2 * slop
            sup[near] = np.maximum(sup[near], nn[near] @ up)
        pos[idx] = P
        support[idx] = sup
        if len(ii):
            diff = pos[ii] - pos[jj]
            dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            nn = diff / np.maximum(dist, 1e-12)[:, None]
            d = dist - rsum
            hit = np.flatnonzero(d < -slop)
            if len(hit):
                corr = (-slop - d[hit])[:, None] * nn[hit]
                delta = _scatter(wi[hit, None] * corr, ii[hit], n) - _scatter(wj[hit, None] * corr, jj[hit], n)
                count = np.bincount(ii[hit], mov[ii[hit]], minlength=n) + np.bincount(jj[hit], mov[jj[hit]], minlength=n)
                pos += _OMEGA * delta / np.maximum(count, 1.0)[:, None]
            near = np.flatnonzero(d < 2 * slop)
            if len(near):
                upc = nn[near] @ up
                np.maximum.at(support, ii[near], upc)
                np.maximum.at(support, jj[near], -upc)
        resting = support >= cos_stick
        if np.max(np.abs(pos - start)) < tol:
            break
    return pos


def _container_spheres(container, P, r):
    out = [(P[:, 2] - r, np.tile([0.0, 0.0, 1.0], (len(P), 1)))]
    below = P[:, 2] <= container.height
    if container.kind == "bowl":
        rho = np.hypot(P[:, 0], P[:, 1])
        safe = np.maximum(rho, 1e-12)
        u = np.column_stack([P[:, 0] / safe, P[:, 1] / safe, np.zeros(len(P))])
        d = np.where(below, container.radius - rho - r, np.inf)
        out.append((d, -u))
    else:
        for axis, half in ((0, container.half_x), (1, container.half_y)):
            for sgn in (1.0, -1.0):
                u = np.zeros(3)
                u[axis] = sgn
                d = np.where(below, half - sgn * P[:, axis] - r, np.inf)
                out.append((d, np.tile(-u, (len(P), 1))))
    return out


def relax(objects, positions, container, obstacles=(), movable=None, iterations=20,
          gravity=(0.0, 0.0, -1.0), nudge=0.0, slop=SLOP, tol=1e-4, margin=2.0, mu=0.5):
    """Position-based relaxation of object centers.

    Gauss-Seidel projection of every penetrating pair to a separation of
    ``-slop`` (a hair of overlap, so resting contacts stay detectable).
    ``obstacles`` is a sequence of ``(shape, pose)`` static bodies (hand
    links).  Each iteration first nudges movable objects by ``nudge`` mm along
    gravity.  Returns the new ``(n, 3)`` positions.
    """
    pos = np.array(positions, dtype=float, copy=True)
    n = len(objects)
    if n == 0:
        return pos
    mov = np.ones(n, dtype=bool) if movable is None else np.asarray(movable, dtype=bool)
    if not mov.any():
        return pos
    g = np.asarray(gravity, dtype=float)
    g = g / np.linalg.norm(g)
    if all(type(o.shape) is Sphere for o in objects) and all(
        type(s) in (Sphere, Capsule, Cylinder) for s, _ in obstacles
    ):
        cylinders = [(s, p) for s, p in obstacles if type(s) is Cylinder]
        if _pbd.AVAILABLE and len(cylinders) <= 1 and all(type(s) is not Sphere for s, _ in obstacles):
            caps = [(p.position - p.rotation[:, 2] * s.half_length, 2.0 * p.rotation[:, 2] * s.half_length, s.radius)
                    for s, p in obstacles if type(s) is Capsule]
            cyl = None
            if cylinders:
                s, p = cylinders[0]
                cyl = (s.radius, 0.5 * s.height, p.position, p.rotation)
            ii, jj = np.triu_indices(n, 1)
            keep = mov[ii] | mov[jj]
            pairs = np.column_stack([ii[keep], jj[keep]])
            rad = np.array([o.shape.radius for o in objects])
            return _pbd.relax_spheres(pos, rad, mov, pairs, caps, cyl, container, g, nudge, slop, tol, mu, iterations)
        return _relax_spheres(objects, pos, container, list(obstacles), mov, iterations, g, nudge, slop, tol, mu)
    shapes = [o.shape for o in objects]
    radii = np.array([s.bounding_radius for s in shapes])
    base_poses = [o.pose for o in objects]
    reach = margin + nudge * iterations

    # Broadphase once with a generous margin; objects move little per call.
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            if not (mov[i] or mov[j]):
                continue
            if np.linalg.norm(pos[i] - pos[j]) <= radii[i] + radii[j] + reach:
                pairs.append((i, j))
    obs_pairs = []
    for k, (shape, pose) in enumerate(obstacles):
        rk = shape.bounding_radius
        for i in np.flatnonzero(mov):
            if np.linalg.norm(pos[i] - pose.position) <= radii[i] + rk + reach:
                obs_pairs.append((k, i))
    mov_idx = np.flatnonzero(mov)

    for _ in range(iterations):
        start = pos.copy()
        if nudge:
            pos[mov] += nudge * g
        for i in mov_idx:
            pose = base_poses[i].moved_to(pos[i])
            for res in container.distances(shapes[i], pose):
                if res.distance < -slop:
                    pos[i] += (-slop - res.distance) * res.normal
                    pose = base_poses[i].moved_to(pos[i])
        for k, i in obs_pairs:
            shape, opose = obstacles[k]
            res = pair_distance(shapes[i], base_poses[i].moved_to(pos[i]), shape, opose)
            if res.distance < -slop:
                pos[i] += (-slop - res.distance) * res.normal
        for i, j in pairs:
            res = pair_distance(shapes[i], base_poses[i].moved_to(pos[i]), shapes[j], base_poses[j].moved_to(pos[j]))
            if res.distance < -slop:
                corr = (-slop - res.distance) * res.normal
                if mov[i] and mov[j]:
                    pos[i] += 0.5 * corr
                    pos[j] -= 0.5 * corr
                elif mov[i]:
                    pos[i] += corr
                else:
                    pos[j] -= corr
        if np.max(np.abs(pos - start)) < tol:
            break
    return pos


def _supported(idx, objects, positions, container, tol):
    """True if body ``idx`` touches the floor or another body from below."""
    obj = objects[idx]
    pose = obj.pose.moved_to(positions[idx])
    floor = container.distances(obj.shape, pose)[0]
    if floor.distance <= tol:
        return True
    r = obj.shape.bounding_radius
    for j, other in enumerate(objects):
        if j == idx or np.linalg.norm(positions[j] - positions[idx]) > r + other.shape.bounding_radius + tol:
            continue
        res = pair_distance(obj.shape, pose, other.shape, other.pose.moved_to(positions[j]))
        if res.distance <= tol and res.normal[2] > 1e-6:
            return True
    return False


def _project_one(shape, base_pose, pos, near, container):
    pose = base_pose.moved_to(pos)
    for res in container.distances(shape, pose):
        if res.distance < 0.0:
            pos = pos - res.distance * res.normal
            pose = base_pose.moved_to(pos)
    for o in near:
        res = pair_distance(shape, pose, o.shape, o.pose)
        if res.distance < 0.0:
            pos = pos - res.distance * res.normal
            pose = base_pose.moved_to(pos)
    return pos


def drop_object(placed, container, obj, rng=None, settle_tol=SETTLE_TOL, max_roll=600, roll_step=None):
    """Drop ``obj`` (positioned above the pile) onto ``placed`` bodies.

    Returns the settled instance, or ``None`` if it ends up penetrating,
    outside the container or unsupported.
    """
    shape = obj.shape
    r = shape.bounding_radius
    if roll_step is None:
        roll_step = 0.05 * r
    base_pose = obj.pose
    pos = obj.position.copy()
    down = np.array([0.0, 0.0, -1.0])

    # Conservative advancement straight down.
    column = [o for o in placed if math.hypot(*(o.position[:2] - pos[:2])) <= r + o.shape.bounding_radius]
    for _ in range(500):
        pose = base_pose.moved_to(pos)
        d = container.distances(shape, pose)[0].distance
        for o in column:
            d = min(d, pair_distance(shape, pose, o.shape, o.pose).distance)
        if d <= 1e-3:
            break
        pos = pos + d * down

    # Slide into a resting place under gravity nudges.
    near = []
    anchor = None
    kicked = False
    prev = pos.copy()
    for it in range(max_roll):
        if anchor is None or np.linalg.norm(pos - anchor) > 2.0:
            anchor = pos.copy()
            near = [o for o in placed if np.linalg.norm(o.position - pos) <= r + o.shape.bounding_radius + 5.0]
        pos = pos + roll_step * down
        for _ in range(3):
            pos = _project_one(shape, base_pose, pos, near, container)
        moved = np.linalg.norm(pos - prev)
        prev = pos.copy()
        if moved >= 0.1 * roll_step:
            kicked = False
            continue
        if kicked or rng is None:
            break
        # Resting: a small sideways kick rules out balancing on an apex.
        pos[:2] += rng.normal(scale=2e-2 * r, size=2)
        kicked = True
    near = [o for o in placed if np.linalg.norm(o.position - pos) <= r + o.shape.bounding_radius + 1.0]
    for _ in range(20):
        pos = _project_one(shape, base_pose, pos, near, container)
    settled = obj.moved(pos)

    pose = settled.pose
    if not container.contains_xy(pos, tol=0.0):
        return None
    for res in container.distances(shape, pose):
        if res.distance < -settle_tol:
            return None
    for o in near:
        if pair_distance(shape, pose, o.shape, o.pose).distance < -settle_tol:
            return None
    positions = np.array([o.position for o in placed] + [pos])
    if not _supported(len(placed), list(placed) + [settled], positions, container, settle_tol):
        return None
    return settled


def settle_pile(container, spec, count, seed, settle_tol=SETTLE_TOL, max_attempts=1000, max_packing=0.5):
    """Build a deterministic pile of ``count`` objects of ``spec``.

    Raises ``PlacementError`` when an object cannot be placed within
    ``max_attempts`` attempts, and ``ValueError`` when the requested objects
    would exceed ``max_packing`` of the container volume.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if isinstance(spec, str):
        spec = ShapeSpec(spec)
    params = spec.resolved_params()
    proto = make_shape(spec.kind, params)
    if count * proto.volume > max_packing * container.volume:
        raise ValueError(
            f"{count} x {spec.label} exceeds packing fraction {max_packing} of the container volume"
        )
    rng = np.random.default_rng(seed)
    r = proto.bounding_radius
    placed = []
    for i in range(count):
        for _attempt in range(max_attempts):
            q = random_quaternion(rng) if spec.kind != "sphere" else np.array([1.0, 0.0, 0.0, 0.0])
            xy = container.sample_xy(rng, margin=r)
            top = max((o.position[2] + o.shape.bounding_radius for o in placed), default=0.0)
            z = top + r + 1.0
            obj = ObjectInstance(i, spec.kind, dict(params), np.array([xy[0], xy[1], z]), q, spec.size_class)
            obj._shape = proto
            done = drop_object(placed, container, obj, rng=rng, settle_tol=settle_tol)
            if done is not None:
                placed.append(done)
                break
        else:
            raise PlacementError(f"object {i} could not be placed in {max_attempts} attempts")
    return SceneState(container, placed)


@dataclass
class Penetration:
    pair: tuple
    depth: float
    point: np.ndarray
    normal: np.ndarray


def penetration_set(scene, links=(), threshold=0.0, include_objects=True, include_container=False):
    """All body pairs closer than ``threshold`` (default: touching or penetrating).

    ``links`` is a posed link set (``PosedHand`` or a sequence of objects with
    ``name``, ``shape`` and ``pose``).  Pair names are ``(link name, object
    id)`` for hand pairs and ``(id, id)`` for object pairs.  ``normal`` points
    from the second body toward the first, and ``point`` is the midpoint of
    the witness points.
    """
    link_list = getattr(links, "links", links)
    out = []
    objs = scene.objects
    for lk in link_list:
        rl = lk.shape.bounding_radius
        for o in objs:
            if np.linalg.norm(o.position - lk.pose.position) > rl + o.shape.bounding_radius + max(threshold, 0.0):
                continue
            res = pair_distance(o.shape, o.pose, lk.shape, lk.pose)
            if res.distance < threshold:
                out.append(Penetration((lk.name, o.id), -res.distance, 0.5 * (res.point_a + res.point_b), -res.normal))
    if include_objects:
        for i, a in enumerate(objs):
            for b in objs[i + 1:]:
                if np.linalg.norm(a.position - b.position) > a.shape.bounding_radius + b.shape.bounding_radius + max(threshold, 0.0):
                    continue
                res = pair_distance(a.shape, a.pose, b.shape, b.pose)
                if res.distance < threshold:
                    out.append(Penetration((a.id, b.id), -res.distance, 0.5 * (res.point_a + res.point_b), res.normal))
    if include_container:
        for o in objs:
            for res in scene.container.distances(o.shape, o.pose):
                if res.distance < threshold:
                    out.append(Penetration((o.id, "container"), -res.distance, 0.5 * (res.point_a + res.point_b), res.normal))
    return out


_HEADER = "# mogsim scene v1"


def scene_to_text(scene):
    """One header, one container line, one gravity line, one line per object.

    Object lines read ``object <id> <kind> <size_class> k=v ... | x y z | w x y z``.
    Floats use ``repr`` so the round trip is exact.
    """
    lines = [_HEADER, scene.container.to_text(), "gravity " + " ".join(repr(float(v)) for v in scene.gravity)]
    for o in scene.objects:
        params = " ".join(f"{k}={float(v)!r}" for k, v in sorted(o.params.items()))
        pos = " ".join(repr(float(v)) for v in o.position)
        quat = " ".join(repr(float(v)) for v in o.quaternion)
        lines.append(f"object {o.id} {o.kind} {o.size_class} {params} | {pos} | {quat}")
    return "\n".join(lines) + "\n"


def scene_from_text(text):
    container = None
    gravity = np.array([0.0, 0.0, -1.0])
    objects = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        if head == "container":
            parts = rest.split()
            kw = dict(p.split("=", 1) for p in parts[1:])
            container = Container(kind=parts[0], **{k: float(v) for k, v in kw.items()})
        elif head == "gravity":
            gravity = np.array([float(v) for v in rest.split()])
        elif head == "object":
            try:
                meta, pos, quat = (s.split() for s in rest.split("|"))
                params = {k: float(v) for k, v in (p.split("=", 1) for p in meta[3:])}
                objects.append(
                    ObjectInstance(int(meta[0]), meta[1], params, np.array([float(v) for v in pos]),
                                   np.array([float(v) for v in quat]), meta[2])
                )
            except (ValueError, IndexError) as exc:
                raise ValueError(f"line {lineno}: malformed object record: {exc}") from None
        else:
            raise ValueError(f"line {lineno}: unknown record {head!r}")
    if container is None:
        raise ValueError("scene text has no container line")
    return SceneState(container, objects, gravity)
