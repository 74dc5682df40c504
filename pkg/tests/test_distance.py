import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from mogsim.distance import point_distance, segment_closest_points, signed_distance
from mogsim.geometry import Box, Capsule, Cone, Cylinder, Hemisphere, Polytope, Pose, Sphere, Torus


def fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = math.pi * (1 + 5**0.5) * i
    return np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])


def h_box(half, R, c, D):
    return D @ c + np.abs(D @ R) @ np.asarray(half)


def h_cylinder(r, hh, R, c, D):
    L = D @ R
    return D @ c + r * np.hypot(L[:, 0], L[:, 1]) + hh * np.abs(L[:, 2])


def h_vertices(V, D):
    return (D @ V.T).max(axis=1)


def support_oracle(hA, hB, n=100_000, polish=5):
    """Signed distance of convex A and B from their support functions.

    Separated: max_d -(h_A(-d) + h_B(d)).  Overlapping: -min_d (h_A(d) + h_B(-d)).
    Directions are sampled densely, then the best few are polished with
    Nelder-Mead because the objective has kinks along edges.
    """
    D = fibonacci_sphere(n)
    gap = -(hA(-D) + hB(D))
    if gap.max() > 0:
        f = lambda E: hA(-E) + hB(E)
    else:
        f = lambda E: hA(E) + hB(-E)
    vals = f(D)
    best = vals.min()
    for i in np.argsort(vals)[:polish]:
        g = lambda x: f((x / np.linalg.norm(x))[None])[0]
        r = minimize(g, D[i], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        best = min(best, r.fun)
    return -best


def pose(pos, rotvec):
    q = Rotation.from_rotvec(rotvec).as_quat()
    return Pose(pos, [q[3], q[0], q[1], q[2]])


def test_sphere_sphere():
    r = signed_distance(Sphere(10), Pose([25.0, 0, 0]), Sphere(10), Pose())
    assert r.distance == pytest.approx(5.0)
    assert np.allclose(r.normal, [1, 0, 0])
    s = signed_distance(Sphere(10), Pose(), Sphere(10), Pose([25.0, 0, 0]))
    assert s.distance == pytest.approx(5.0)
    assert np.allclose(s.normal, -r.normal)
    assert np.allclose(s.point_a, r.point_b) and np.allclose(s.point_b, r.point_a)


def test_sphere_plane_penetration():
    plane = Box(1000.0, 1000.0, 10.0)
    r = signed_distance(Sphere(10), Pose([3.0, -4.0, 8.0]), plane, Pose([0, 0, -10.0]))
    assert r.distance == pytest.approx(-2.0, abs=1e-9)
    assert np.allclose(r.normal, [0, 0, 1], atol=1e-9)


@pytest.mark.parametrize("offset,rot", [
    ([8.0, 3.0, 6.0], [0.3, -0.5, 0.9]),
    ([2.0, 11.0, -4.0], [1.2, 0.1, 0.4]),
    ([16.0, 5.0, 3.0], [0.0, 0.7, 0.2]),
])
def test_box_cylinder_against_support_oracle(offset, rot):
    pb, pc = pose([0, 0, 0], [0.2, 0.1, -0.3]), pose(offset, rot)
    got = signed_distance(Box(10, 10, 10), pb, Cylinder(5, 20), pc).distance
    want = support_oracle(lambda D: h_box([10, 10, 10], pb.rotation, pb.position, D),
                          lambda D: h_cylinder(5, 10, pc.rotation, pc.position, D))
    assert got == pytest.approx(want, abs=0.05)


def test_box_cylinder_generic_penetration_is_negative():
    pb, pc = Pose(), pose([9.0, 4.0, 2.0], [0.4, 0.8, 0.1])
    assert signed_distance(Box(10, 10, 10), pb, Cylinder(5, 20), pc).distance < 0


def test_separated_box_cylinder_oracle():
    pb, pc = Pose(), pose([30.0, 12.0, -5.0], [0.9, 0.2, 0.4])
    got = signed_distance(Box(10, 10, 10), pb, Cylinder(5, 20), pc).distance
    want = support_oracle(lambda D: h_box([10, 10, 10], pb.rotation, pb.position, D),
                          lambda D: h_cylinder(5, 10, pc.rotation, pc.position, D))
    assert want > 0
    assert got == pytest.approx(want, abs=0.05)


def test_polytope_sphere_oracle():
    V = np.array([[10.0, 0, 0], [-5, 8, 0], [-5, -8, 0], [0, 0, 12]])
    poly = Polytope(V - V.mean(axis=0))
    pp, ps = pose([0, 0, 0], [0.3, 0.2, 0.1]), Pose([9.0, 2.0, 6.0])
    got = signed_distance(poly, pp, Sphere(4.0), ps).distance
    Vw = pp.apply(poly.vertices if hasattr(poly, "vertices") else V - V.mean(axis=0))
    want = support_oracle(lambda D: h_vertices(Vw, D), lambda D: D @ ps.position + 4.0)
    assert got == pytest.approx(want, abs=0.05)


def test_torus_on_axis_exact():
    t = Torus(20.0, 5.0)
    r = signed_distance(Sphere(3.0), Pose([0, 0, 15.0]), t, Pose())
    assert r.distance == pytest.approx(math.hypot(20.0, 15.0) - 5.0 - 3.0, abs=1e-6)


def test_capsule_sphere_analytic():
    r = signed_distance(Sphere(10), Pose([0, 21.0, 5.0]), Capsule(20.0, 12.0), Pose())
    assert r.distance == pytest.approx(-1.0, abs=1e-9)


shape_st = st.sampled_from([
    Sphere(7.0), Box(6.0, 4.0, 9.0), Cylinder(5.0, 14.0), Capsule(8.0, 4.0), Cone(6.0, 12.0), Hemisphere(7.0),
])
vec = st.tuples(*(st.floats(-15, 15),) * 3)
rotv = st.tuples(*(st.floats(-3, 3),) * 3)


@given(shape_st, shape_st, vec, rotv, rotv)
def test_symmetry(a, b, pos, ra, rb):
    pa, pb = pose([0, 0, 0], ra), pose(pos, rb)
    r1 = signed_distance(a, pa, b, pb)
    r2 = signed_distance(b, pb, a, pa)
    assert r1.distance == pytest.approx(r2.distance, abs=1e-6)
    assert abs(np.linalg.norm(r1.normal) - 1) < 1e-9
    if r1.distance > 1e-3:
        assert np.allclose(r1.normal, -r2.normal, atol=1e-4)
        assert np.allclose(r1.point_a, r2.point_b, atol=1e-4)


@given(vec, rotv)
def test_box_cylinder_sign_matches_oracle(pos, rot):
    pb, pc = Pose(), pose(pos, rot)
    got = signed_distance(Box(6, 4, 9), pb, Cylinder(5, 14), pc).distance
    want = support_oracle(lambda D: h_box([6, 4, 9], pb.rotation, pb.position, D),
                          lambda D: h_cylinder(5, 7, pc.rotation, pc.position, D), n=5_000, polish=3)
    assert got == pytest.approx(want, abs=0.05)


def test_point_distance_sphere():
    assert point_distance([0, 0, 30.0], Sphere(10), Pose()).distance == pytest.approx(20.0)


def test_segment_closest_points_parallel_offset():
    out = segment_closest_points(np.zeros(3), np.array([10.0, 0, 0]), np.array([0, 5.0, 0]), np.array([10.0, 5.0, 0]))
    p, q = out[0], out[1]
    assert np.linalg.norm(np.asarray(p) - np.asarray(q)) == pytest.approx(5.0)
