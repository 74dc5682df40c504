"""Signed distance between posed primitives.

Negative distance means penetration.  ``normal`` is the unit direction from
body ``b`` toward body ``a``: translating ``a`` by ``-distance * normal``
brings the two bodies into touching contact.

Dispatch order: analytic formulas for sphere/capsule/box/cylinder pairs,
parametric circle search for tori, and GJK (separated) / EPA (penetrating)
on shape cores for everything else.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import ConvexHull, QhullError

from .geometry import Box, Capsule, Cylinder, Point, Pose, Shape, Sphere, Torus

__all__ = ["DistanceResult", "signed_distance", "point_distance", "segment_closest_points"]

_ROUND = (Sphere, Capsule, Point)


@dataclass
class DistanceResult:
    distance: float
    point_a: np.ndarray
    point_b: np.ndarray
    normal: np.ndarray

    def swapped(self):
        return DistanceResult(self.distance, self.point_b, self.point_a, -self.normal)


def signed_distance(shape_a: Shape, pose_a: Pose, shape_b: Shape, pose_b: Pose) -> DistanceResult:
    """Signed distance, witness points and separating normal of two posed shapes."""
    if _order_key(shape_a, pose_a) > _order_key(shape_b, pose_b):
        return _dispatch(shape_b, pose_b, shape_a, pose_a).swapped()
    return _dispatch(shape_a, pose_a, shape_b, pose_b)


def point_distance(point, shape, pose):
    """Signed distance from a world point to a posed shape."""
    return signed_distance(Point(), Pose(point), shape, pose)


def _order_key(shape, pose):
    return (shape.key(), tuple(pose.position.tolist()), tuple(pose.quaternion.tolist()))


def _dispatch(sa, pa, sb, pb):
    if isinstance(sa, Torus) or isinstance(sb, Torus):
        return _torus_distance(sa, pa, sb, pb)
    if isinstance(sa, _ROUND) and isinstance(sb, _ROUND):
        return _round_round(sa, pa, sb, pb)
    if isinstance(sa, (Sphere, Point)) and isinstance(sb, (Box, Cylinder)):
        return _sphere_analytic(sa, pa, sb, pb)
    if isinstance(sb, (Sphere, Point)) and isinstance(sa, (Box, Cylinder)):
        return _sphere_analytic(sb, pb, sa, pa).swapped()
    return _gjk_epa(sa, pa, sb, pb)


# ----------------------------------------------------------------------------
# analytic pairs


def _core_segment(shape, pose):
    if isinstance(shape, Capsule):
        axis = pose.rotation[:, 2] * shape.half_length
        return pose.position - axis, pose.position + axis
    return pose.position, pose.position


def segment_closest_points(p1, q1, p2, q2):
    """Closest points between segments [p1, q1] and [p2, q2]."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    eps = 1e-18
    if a <= eps and e <= eps:
        return p1, p2
    if a <= eps:
        s = 0.0
        t = min(max(f / e, 0.0), 1.0)
    else:
        c = float(d1 @ r)
        if e <= eps:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > 1e-12 * a * e else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
    return p1 + d1 * s, p2 + d2 * t


def _fallback_normal(pa, pb):
    d = pa.position - pb.position
    n = np.linalg.norm(d)
    if n > 1e-12:
        return d / n
    return np.array([0.0, 0.0, 1.0])


def _round_round(sa, pa, sb, pb):
    a0, a1 = _core_segment(sa, pa)
    b0, b1 = _core_segment(sb, pb)
    ca, cb = segment_closest_points(a0, a1, b0, b1)
    diff = ca - cb
    dist = math.sqrt(float(diff @ diff))
    if dist > 1e-12:
        n = diff / dist
    else:
        # Cores intersect: pick the direction perpendicular to the core(s).
        n = _fallback_normal(pa, pb)
        for seg in ((a0, a1), (b0, b1)):
            axis = seg[1] - seg[0]
            la = np.linalg.norm(axis)
            if la > 0:
                axis = axis / la
                n = n - (n @ axis) * axis
                if np.linalg.norm(n) < 1e-9:
                    n = np.cross(axis, [1.0, 0.0, 0.0])
                    if np.linalg.norm(n) < 1e-9:
                        n = np.cross(axis, [0.0, 1.0, 0.0])
                n = n / np.linalg.norm(n)
    ra, rb = sa.margin, sb.margin
    return DistanceResult(dist - ra - rb, ca - ra * n, cb + rb * n, n)


def _sphere_analytic(sphere, ps, solid, pb):
    """Sphere (or point) against a box or cylinder, exact."""
    q = pb.inverse_apply(ps.position)
    if isinstance(solid, Box):
        h = solid.half
        outside = np.abs(q) > h
        if outside.any():
            closest = np.clip(q, -h, h)
            diff = q - closest
            d = float(np.linalg.norm(diff))
            n_local = diff / d
        else:
            gaps = h - np.abs(q)
            i = int(np.argmin(gaps))
            closest = q.copy()
            sgn = 1.0 if q[i] >= 0 else -1.0
            closest[i] = sgn * h[i]
            d = -float(gaps[i])
            n_local = np.zeros(3)
            n_local[i] = sgn
    else:
        r, hh = solid.radius, 0.5 * solid.height
        rho = math.hypot(q[0], q[1])
        radial = np.array([q[0] / rho, q[1] / rho, 0.0]) if rho > 1e-12 else np.array([1.0, 0.0, 0.0])
        sgn = 1.0 if q[2] >= 0 else -1.0
        if rho <= r and abs(q[2]) <= hh:
            side_gap = r - rho
            cap_gap = hh - abs(q[2])
            if side_gap < cap_gap:
                closest = np.array([radial[0] * r, radial[1] * r, q[2]])
                d = -side_gap
                n_local = radial
            else:
                closest = np.array([q[0], q[1], sgn * hh])
                d = -cap_gap
                n_local = np.array([0.0, 0.0, sgn])
        else:
            cr = min(rho, r)
            closest = np.array([radial[0] * cr, radial[1] * cr, min(max(q[2], -hh), hh)])
            diff = q - closest
            d = float(np.linalg.norm(diff))
            n_local = diff / d
    n = pb.apply_vector(n_local)
    wb = pb.apply(closest)
    rad = sphere.margin
    return DistanceResult(d - rad, ps.position - rad * n, wb, n)


# ----------------------------------------------------------------------------
# torus


def _circle_world(torus, pose, phi):
    return pose.apply(torus.circle_point(phi))


def _torus_sphere(torus, pt, center, radius):
    q = pt.inverse_apply(center)
    rho = math.hypot(q[0], q[1])
    if rho > 1e-12:
        c = np.array([torus.major * q[0] / rho, torus.major * q[1] / rho, 0.0])
    else:
        c = np.array([torus.major, 0.0, 0.0])
    diff = q - c
    dist = float(np.linalg.norm(diff))
    n_local = diff / dist if dist > 1e-12 else np.array([0.0, 0.0, 1.0])
    n = pt.apply_vector(n_local)
    cw = pt.apply(c)
    # a = torus, b = sphere; n points from the torus core toward the sphere
    return DistanceResult(dist - torus.minor - radius, cw + torus.minor * n, center - radius * n, -n)


def _torus_distance(sa, pa, sb, pb):
    """Torus vs anything: minimize over the torus' core circle."""
    if not isinstance(sa, Torus):
        return _torus_distance(sb, pb, sa, pa).swapped()
    torus, pt = sa, pa
    if isinstance(sb, (Sphere, Point)):
        return _torus_sphere(torus, pt, pb.position, sb.margin)
    tube = Sphere(torus.minor)

    def at(phi):
        return signed_distance(tube, Pose(_circle_world(torus, pt, phi)), sb, pb)

    n_samples = 36
    phis = np.linspace(0.0, 2 * math.pi, n_samples, endpoint=False)
    vals = np.array([at(p).distance for p in phis])
    step = 2 * math.pi / n_samples
    best_phi, best_val = None, math.inf
    for i in np.argsort(vals)[:2]:
        res = minimize_scalar(
            lambda p: at(p).distance,
            bounds=(phis[i] - step, phis[i] + step),
            method="bounded",
            options={"xatol": 1e-7},
        )
        if res.fun < best_val:
            best_phi, best_val = res.x, res.fun
    if vals.min() < best_val:
        best_phi = phis[int(np.argmin(vals))]
    return at(best_phi)


# ----------------------------------------------------------------------------
# GJK / EPA on cores


def _world_support(shape, pose):
    R = pose.rotation
    t = pose.position

    def s(d):
        return R @ shape.core_support(R.T @ d) + t

    return s


def _closest_on_simplex(W):
    """Closest point to the origin of conv(W); returns (point, kept indices, weights).

    Only sub-simplices containing the newest vertex are candidates.
    """
    n = len(W)
    last = n - 1
    best = None
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            if last not in subset:
                continue
            P = np.array([W[i] for i in subset])
            if size == 1:
                lam = np.array([1.0])
            else:
                D = (P[1:] - P[0]).T
                G = D.T @ D
                try:
                    mu = np.linalg.solve(G, -D.T @ P[0])
                except np.linalg.LinAlgError:
                    continue
                if not np.all(np.isfinite(mu)):
                    continue
                lam = np.concatenate([[1.0 - mu.sum()], mu])
                if size == 4 and abs(np.linalg.det(G)) < 1e-18 * max(1.0, np.abs(G).max() ** 3):
                    continue
            if np.any(lam < -1e-12):
                continue
            x = lam @ P
            dd = float(x @ x)
            if best is None or dd < best[0] - 1e-15:
                best = (dd, x, subset, lam)
    if best is None:
        return W[last], (last,), np.array([1.0])
    return best[1], best[2], best[3]


def _gjk(sa, sb, v0, max_iter=64):
    """GJK on support maps; returns (overlap, distance, pa, pb, simplex)."""
    v = v0 if np.linalg.norm(v0) > 1e-12 else np.array([1.0, 0.0, 0.0])
    W, A, B = [], [], []
    lam = None
    for _ in range(max_iter):
        a = sa(-v)
        b = sb(v)
        w = a - b
        vv = float(v @ v)
        if W and vv - float(v @ w) <= 1e-10 * vv + 1e-14:
            break
        if any(np.array_equal(w, x) for x in W):
            break
        W.append(w)
        A.append(a)
        B.append(b)
        v, kept, lam = _closest_on_simplex(W)
        W = [W[i] for i in kept]
        A = [A[i] for i in kept]
        B = [B[i] for i in kept]
        if len(W) == 4 or float(v @ v) < 1e-20:
            return True, 0.0, None, None, (W, A, B)
    if lam is None:
        a = sa(-v)
        b = sb(v)
        return False, float(np.linalg.norm(a - b)), a, b, ([a - b], [a], [b])
    pa = lam @ np.array(A)
    pb = lam @ np.array(B)
    return False, float(np.linalg.norm(pa - pb)), pa, pb, (W, A, B)


_EPA_DIRS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
    + [[i, j, k] for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)],
    dtype=float,
)
_EPA_DIRS[6:] /= math.sqrt(3.0)


def _epa(sa, sb, simplex, scale):
    """Penetration depth of overlapping cores via support-point hull expansion."""
    W, A, B = (list(x) for x in simplex)
    for d in _EPA_DIRS:
        a = sa(d)
        b = sb(-d)
        W.append(a - b)
        A.append(a)
        B.append(b)
    tol = 1e-7 * max(scale, 1.0)
    hull = None
    for _ in range(128):
        try:
            hull = ConvexHull(np.array(W))
        except QhullError:
            hull = ConvexHull(np.array(W), qhull_options="QJ")
        eq = hull.equations
        offs = -eq[:, 3]
        j = int(np.argmin(offs))
        n = eq[j, :3]
        dmin = float(offs[j])
        a = sa(n)
        b = sb(-n)
        w = a - b
        if float(w @ n) - dmin <= tol:
            break
        W.append(w)
        A.append(a)
        B.append(b)
    target = dmin * n
    # Coplanar facets are triangulated; use the triangle holding the projection.
    best = None
    for k in np.flatnonzero(offs <= dmin + tol):
        if float(eq[k, :3] @ n) < 1.0 - 1e-9:
            continue
        tri = hull.simplices[k]
        P = np.array([W[i] for i in tri])
        D = (P[1:] - P[0]).T
        mu, *_ = np.linalg.lstsq(D, target - P[0], rcond=None)
        lam = np.concatenate([[1.0 - mu.sum()], mu])
        worst = float(lam.min())
        if best is None or worst > best[0]:
            best = (worst, tri, lam)
        if worst >= -1e-9:
            break
    _, tri, lam = best
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum()
    pa = lam @ np.array([A[i] for i in tri])
    pb = lam @ np.array([B[i] for i in tri])
    return max(dmin, 0.0), -n, pa, pb


def _gjk_epa(sa_shape, pa_pose, sb_shape, pb_pose):
    sa = _world_support(sa_shape, pa_pose)
    sb = _world_support(sb_shape, pb_pose)
    v0 = pa_pose.position - pb_pose.position
    overlap, dist, pa, pb, simplex = _gjk(sa, sb, v0)
    ma, mb = sa_shape.margin, sb_shape.margin
    if not overlap and dist > 1e-9:
        n = (pa - pb) / dist
        return DistanceResult(dist - ma - mb, pa - ma * n, pb + mb * n, n)
    scale = sa_shape.bounding_radius + sb_shape.bounding_radius
    depth, n, pa, pb = _epa(sa, sb, simplex, scale)
    return DistanceResult(-depth - ma - mb, pa - ma * n, pb + mb * n, n)
