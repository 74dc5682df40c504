"""Per-object hold status: force closure, containment and gravity support.

Force closure is decided by a linear program on the linearized friction
cones: the origin must lie strictly inside the convex hull of the primitive
contact wrenches.  Containment is approximated by sampling translational
escape directions.  Support checks that upward-facing contacts carry the
center of mass inside their friction footprint.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .scene import pair_distance

__all__ = [
    "HOLD_TAGS",
    "FrictionModel",
    "ForceClosureResult",
    "HoldStatus",
    "friction_pyramid",
    "contact_wrenches",
    "force_closure",
    "escape_directions",
    "containment_test",
    "support_test",
    "hold_status",
    "evaluate_holds",
]

HOLD_TAGS = ("force-closed", "contained", "supported", "free")
HELD_TAGS = frozenset(HOLD_TAGS[:3])
FC_MARGIN = 1e-6


@dataclass(frozen=True)
class FrictionModel:
    mu: float = 0.5
    k_edges: int = 8

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("friction coefficient must be non-negative")
        if self.k_edges < 3:
            raise ValueError("friction pyramid needs at least 3 edges")


@dataclass
class ForceClosureResult:
    closed: bool
    degenerate: bool = False
    epsilon: float = 0.0

    def __bool__(self):
        return self.closed


@dataclass
class HoldStatus:
    tag: str = "free"
    supporting: list = field(default_factory=list)
    degenerate: bool = False

    @property
    def held(self):
        return self.tag in HELD_TAGS

    def to_dict(self):
        return {"tag": self.tag, "supporting": list(self.supporting), "degenerate": self.degenerate}

    @classmethod
    def from_dict(cls, d):
        return cls(d["tag"], list(d.get("supporting", [])), bool(d.get("degenerate", False)))


def _tangents(n):
    a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(n, a)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(n, t1)


def friction_pyramid(normal, mu=0.5, k_edges=8):
    """Unit edge directions of the linearized friction cone about ``normal``."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    if mu == 0:
        return n[None, :].copy()
    if k_edges < 3:
        raise ValueError("friction pyramid needs at least 3 edges")
    t1, t2 = _tangents(n)
    a = 2 * np.pi * np.arange(k_edges) / k_edges
    edges = n[None, :] + mu * (np.cos(a)[:, None] * t1 + np.sin(a)[:, None] * t2)
    return edges / np.linalg.norm(edges, axis=1, keepdims=True)


def contact_wrenches(points, normals, center, radius, mu=0.5, k_edges=8):
    """6 x m matrix of primitive wrenches, torques divided by ``radius``."""
    cols = []
    c = np.asarray(center, dtype=float)
    for p, n in zip(points, normals):
        r = np.asarray(p, dtype=float) - c
        for f in friction_pyramid(n, mu, k_edges):
            cols.append(np.concatenate([f, np.cross(r, f) / radius]))
    if not cols:
        return np.zeros((6, 0))
    return np.array(cols).T


def force_closure(points, normals, center, radius, mu=0.5, k_edges=8, margin=FC_MARGIN):
    """Decide force closure of contacts on a body.

    ``normals`` point into the body.  Returns a truthy
    ``ForceClosureResult``; ``epsilon`` is the largest lower bound on the
    convex weights of a zero-sum combination of primitive wrenches.
    """
    W = contact_wrenches(points, normals, center, radius, mu, k_edges)
    m = W.shape[1]
    if m == 0:
        return ForceClosureResult(False)
    if m < 7 or np.linalg.matrix_rank(W, tol=1e-9) < 6:
        return ForceClosureResult(False, degenerate=True)
    # Variables: lambda (m), eps.  maximize eps
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_eq = np.vstack([np.hstack([W, np.zeros((6, 1))]), np.hstack([np.ones((1, m)), np.zeros((1, 1))])])
    b_eq = np.concatenate([np.zeros(6), [1.0]])
    A_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    b_ub = np.zeros(m)
    bounds = [(0, None)] * m + [(None, 1.0)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        return ForceClosureResult(False)
    eps = float(res.x[-1])
    return ForceClosureResult(eps > margin, epsilon=eps)


def escape_directions(K=64, seed=0, gravity=(0.0, 0.0, -1.0)):
    """The 26 axis/diagonal directions, +-gravity, then seeded random ones up to ``K``."""
    if K < 26:
        raise ValueError("containment needs at least 26 directions")
    dirs = []
    for v in itertools.product((-1, 0, 1), repeat=3):
        if v != (0, 0, 0):
            dirs.append(np.array(v, dtype=float) / np.linalg.norm(v))
    g = np.asarray(gravity, dtype=float)
    g = g / np.linalg.norm(g)
    for d in (g, -g):
        if min(np.linalg.norm(d - e) for e in dirs) > 1e-12:
            dirs.append(d)
    rng = np.random.default_rng(seed)
    while len(dirs) < K:
        v = rng.normal(size=3)
        dirs.append(v / np.linalg.norm(v))
    return np.array(dirs)


def containment_test(obj, obstacles, K=64, seed=0, gravity=(0.0, 0.0, -1.0), steps=20, diameter=None):
    """True if every sampled translation of ``obj`` is blocked.

    ``obstacles`` is a sequence of ``(shape, pose)`` bodies (hand links and
    other held objects).  A direction escapes when the object travels one
    bounding diameter along it without any obstacle distance dropping below
    ``min(start distance, 0) - 0.005 * diameter``.
    """
    shape, pose = obj.shape, obj.pose
    D = diameter if diameter is not None else 2.0 * shape.bounding_radius
    tol = 5e-3 * D
    r = shape.bounding_radius
    obstacles = [(s, p) for s, p in obstacles if np.linalg.norm(p.position - pose.position) <= r + s.bounding_radius + D]
    if not obstacles:
        return False
    start = [pair_distance(shape, pose, s, p).distance for s, p in obstacles]
    for d in escape_directions(K, seed, gravity):
        blocked = False
        for step in range(1, steps + 1):
            moved = pose.moved_to(pose.position + (D * step / steps) * d)
            for (s, p), d0 in zip(obstacles, start):
                if np.linalg.norm(p.position - moved.position) > r + s.bounding_radius:
                    continue
                if pair_distance(shape, moved, s, p).distance < min(d0, 0.0) - tol:
                    blocked = True
                    break
            if blocked:
                break
        if not blocked:
            return False
    return True


def _inside_hull_2d(points, q, tol):
    pts = np.asarray(points, dtype=float)
    mean = pts.mean(axis=0)
    if len(pts) >= 3:
        try:
            hull = ConvexHull(pts)
            return bool(np.all(hull.equations[:, :2] @ q + hull.equations[:, 2] <= tol))
        except QhullError:
            pass
    # Collinear or coincident points: distance to the spanning segment.
    centered = pts - mean
    if len(pts) == 1 or np.allclose(centered, 0.0):
        return float(np.linalg.norm(q - mean)) <= tol
    axis = np.linalg.svd(centered, full_matrices=False)[2][0]
    proj = centered @ axis
    t = min(max(float((q - mean) @ axis), proj.min()), proj.max())
    return float(np.linalg.norm(q - (mean + t * axis))) <= tol


def support_test(center, points, normals, gravity=(0.0, 0.0, -1.0), mu=0.5, scale=1.0, n_samples=16):
    """True if upward-facing contacts carry the center of mass.

    Each contact whose normal (into the body) opposes gravity contributes a
    footprint disc of radius ``mu * h`` around its point, ``h`` being the
    height of the center of mass above it; the center of mass must project
    into the convex hull of these discs.
    """
    g = np.asarray(gravity, dtype=float)
    g = g / np.linalg.norm(g)
    up = -g
    c = np.asarray(center, dtype=float)
    t1, t2 = _tangents(up)
    basis = np.array([t1, t2])
    footprint = []
    for p, n in zip(points, normals):
        if float(np.asarray(n) @ up) <= 1e-9:
            continue
        p = np.asarray(p, dtype=float)
        q = basis @ p
        h = float((c - p) @ up)
        rad = mu * max(h, 0.0)
        footprint.append(q)
        if rad > 0:
            a = 2 * np.pi * np.arange(n_samples) / n_samples
            footprint.extend(q + rad * np.column_stack([np.cos(a), np.sin(a)]))
    if not footprint:
        return False
    return _inside_hull_2d(np.array(footprint), basis @ c, 1e-9 * scale)


def hold_status(obj, contacts, obstacles=(), friction=FrictionModel(), gravity=(0.0, 0.0, -1.0), K=64, seed=0):
    """Hold tag of ``obj`` by precedence force-closed > contained > supported > free.

    ``contacts`` are ``ContactPoint``s acting on the object (``body_a`` is the
    object, normals point into it).  ``obstacles`` feed the containment test.
    """
    if not contacts:
        return HoldStatus("free")
    pts = [c.point for c in contacts]
    nrm = [c.normal for c in contacts]
    ids = [_contact_key(c) for c in contacts]
    rho = obj.shape.characteristic_radius
    center = obj.position
    degenerate = False
    if len(contacts) >= 2:
        fc = force_closure(pts, nrm, center, rho, friction.mu, friction.k_edges)
        if fc.closed:
            return HoldStatus("force-closed", ids)
        degenerate = fc.degenerate
    if containment_test(obj, obstacles, K=K, seed=seed, gravity=gravity):
        return HoldStatus("contained", ids, degenerate)
    up = -np.asarray(gravity, dtype=float)
    if support_test(center, pts, nrm, gravity, friction.mu, scale=rho):
        sup = [k for k, n in zip(ids, nrm) if float(n @ up) > 1e-9]
        return HoldStatus("supported", sup, degenerate)
    return HoldStatus("free", [], degenerate)


def _contact_key(c):
    return str(c.body_b)


def evaluate_holds(scene, hand, contacts, friction=FrictionModel(), K=64, seed=0):
    """Hold status of every object after the hand lifts out of the container.

    Container contacts are discarded.  Objects touching the hand, directly or
    through chains of object contacts, are evaluated; an object's contacts
    with neighbors count only while that neighbor is itself held, so the
    evaluation is repeated until the held set stops shrinking.
    """
    gravity = scene.gravity
    by_id = {o.id: o for o in scene.objects}
    hand_on = {}
    obj_pairs = []
    for c in contacts:
        if c.body_b == "container" or c.body_a == "container":
            continue
        if c.is_hand:
            hand_on.setdefault(c.body_a, []).append(c)
        else:
            obj_pairs.append(c)
    # Objects connected to the hand through object contacts.
    candidates = set(hand_on)
    grew = True
    while grew:
        grew = False
        for c in obj_pairs:
            a, b = c.body_a, c.body_b
            if (a in candidates) != (b in candidates):
                candidates.add(a)
                candidates.add(b)
                grew = True
    statuses = {o.id: HoldStatus("free") for o in scene.objects}
    links = [(lk.shape, lk.pose) for lk in hand.links]
    held = set(candidates)
    while True:
        new = {}
        for oid in sorted(held, key=str):
            obj = by_id[oid]
            on = list(hand_on.get(oid, []))
            for c in obj_pairs:
                if c.body_a == oid and c.body_b in held:
                    on.append(c)
                elif c.body_b == oid and c.body_a in held:
                    on.append(_flip(c))
            others = [(by_id[j].shape, by_id[j].pose) for j in sorted(held, key=str) if j != oid]
            new[oid] = hold_status(obj, on, links + others, friction, gravity, K, seed)
        still = {oid for oid, st in new.items() if st.held}
        for oid, st in new.items():
            statuses[oid] = st
        if still == held:
            break
        for oid in held - still:
            statuses[oid] = HoldStatus("free", [], new[oid].degenerate)
        held = still
    return statuses


def _flip(c):
    from .contacts import ContactPoint

    return ContactPoint(c.body_b, c.body_a, c.point, -c.normal, c.depth)
