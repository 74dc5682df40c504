import numpy as np
import pytest

from mogsim.geometry import Capsule, Pose, Sphere, Torus
from mogsim.hand import HandConfiguration, forward_kinematics
from mogsim.scene import (
    SHAPE_KINDS,
    SIZE_CLASSES,
    Container,
    ObjectInstance,
    SceneState,
    ShapeSpec,
    default_params,
    drop_object,
    make_shape,
    pair_distance,
    penetration_set,
    scene_from_text,
    scene_to_text,
    settle_pile,
)

BOWL = Container("bowl", radius=60.0)
SPHERE10 = ShapeSpec("sphere", "large", {"radius": 10.0})


def test_eleven_kinds_two_sizes():
    assert len(SHAPE_KINDS) == 11
    assert set(SIZE_CLASSES) == {"small", "large"}
    for kind in SHAPE_KINDS:
        for size in SIZE_CLASSES:
            s = ShapeSpec(kind, size).shape()
            assert s.volume > 0
            assert s.bounding_radius <= 0.5 * SIZE_CLASSES[size] * 3**0.5 + 1e-9


def test_invalid_params():
    with pytest.raises(ValueError):
        make_shape("sphere", {"radius": -1.0})
    with pytest.raises(ValueError):
        Torus(5.0, 10.0)
    with pytest.raises(ValueError):
        ShapeSpec("blob", "small")
    with pytest.raises(ValueError):
        default_params("blob", 10.0)


def test_single_sphere_rests_on_floor():
    scene = settle_pile(BOWL, SPHERE10, 1, seed=1)
    assert scene.objects[0].position[2] == pytest.approx(10.0, abs=0.1)


def test_pile_deterministic_byte_for_byte():
    a = scene_to_text(settle_pile(BOWL, SPHERE10, 30, seed=42))
    b = scene_to_text(settle_pile(BOWL, SPHERE10, 30, seed=42))
    assert a == b
    assert a != scene_to_text(settle_pile(BOWL, SPHERE10, 30, seed=43))


def test_three_spheres_on_one_vertical_line():
    placed = []
    rng = np.random.default_rng(0)
    for i in range(3):
        obj = ObjectInstance(i, "sphere", {"radius": 10.0}, [5.0, -3.0, 100.0 + 30 * i])
        done = drop_object(placed, BOWL, obj, rng=rng)
        assert done is not None
        placed.append(done)
    for i in range(3):
        for j in range(i + 1, 3):
            assert np.linalg.norm(placed[i].position - placed[j].position) >= 20.0 - 0.1


def _supported(scene, tol=0.2):
    for o in scene.objects:
        low = o.position[2] - o.shape.bounding_radius
        if low <= tol:
            continue
        below = [p for p in scene.objects if p is not o and p.position[2] < o.position[2]
                 and pair_distance(o.shape, o.pose, p.shape, p.pose).distance < tol]
        if not below:
            return False
    return True


@pytest.mark.parametrize("spec,count", [(SPHERE10, 30), (ShapeSpec("sphere", "large"), 30),
                                        (ShapeSpec("cuboid", "small"), 6), (ShapeSpec("cylinder", "small"), 5),
                                        (ShapeSpec("torus", "large"), 3)])
def test_settled_invariants(spec, count):
    scene = settle_pile(BOWL, spec, count, seed=7)
    assert len(scene.objects) == count
    assert scene.max_penetration() <= 0.1 + 1e-9
    for o in scene.objects:
        assert abs(np.linalg.norm(o.quaternion) - 1) < 1e-9
        assert BOWL.contains_xy(o.position)
        for res in BOWL.distances(o.shape, o.pose):
            assert res.distance >= -0.1
    assert _supported(scene)


def test_packing_limit():
    with pytest.raises(ValueError):
        settle_pile(Container("bowl", radius=20.0, height=20.0), ShapeSpec("sphere", "large"), 30, seed=0)


def test_box_container():
    scene = settle_pile(Container("box", half_x=50.0, half_y=40.0), ShapeSpec("sphere", "small"), 10, seed=3)
    assert scene.max_penetration() <= 0.1 + 1e-9
    assert all(abs(o.position[0]) <= 50 and abs(o.position[1]) <= 40 for o in scene.objects)


def test_scene_text_round_trip():
    scene = settle_pile(BOWL, ShapeSpec("cone", "small"), 3, seed=5)
    text = scene_to_text(scene)
    back = scene_from_text(text)
    assert scene_to_text(back) == text
    assert np.array_equal(back.positions(), scene.positions())


def test_scene_text_malformed():
    with pytest.raises(ValueError):
        scene_from_text("# mogsim scene v1\ncontainer bowl radius=60.0\nobject 0 sphere | 1 2 |\n")


def test_penetration_far_hand_is_empty():
    scene = settle_pile(BOWL, SPHERE10, 10, seed=2)
    hand = forward_kinematics(HandConfiguration(), wrist_pose=Pose([0, 0, 1000.0]))
    assert penetration_set(scene, hand, include_objects=False) == []


def test_fingertip_pressed_two_mm():
    hand = forward_kinematics(HandConfiguration())
    tip = hand.fingertip(3)
    center = tip + np.array([0.0, 0.0, 12.0 + 10.0 - 2.0])
    scene = SceneState(BOWL, [ObjectInstance(0, "sphere", {"radius": 10.0}, center)])
    out = penetration_set(scene, hand, include_objects=False)
    assert len(out) == 1
    assert out[0].depth == pytest.approx(2.0, abs=0.05)
    assert out[0].pair == ("f3.distal", 0)


def _sphere_surface(center, r, n=4000):
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    th = np.pi * (1 + 5**0.5) * i
    return center + r * np.column_stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)])


def _inside_capsule(pts, a, b, radius):
    ab = b - a
    t = np.clip((pts - a) @ ab / (ab @ ab), 0, 1)
    return np.linalg.norm(pts - (a + t[:, None] * ab), axis=1) < radius


def _inside_palm(pts, link):
    local = link.pose.inverse_apply(pts)
    return (np.hypot(local[:, 0], local[:, 1]) < link.shape.radius) & (np.abs(local[:, 2]) < 0.5 * link.shape.height)


def test_closed_fist_against_sampling_oracle():
    hand = forward_kinematics(HandConfiguration(0.0, (45.0, 45.0, 45.0)))
    r = 14.0
    centers = []
    for name, t in (("f1.proximal", 0.5), ("f3.distal", 0.3), ("f2.proximal", 0.8)):
        lk = hand.link(name)
        core = lk.start + t * (lk.end - lk.start)
        centers.append(core + lk.palmar * (lk.shape.radius + r - 1.5))
    # A fourth sphere squeezed against the first.
    centers.append(centers[0] + np.array([0.0, -1.0, 0.0]) * (2 * r - 2.0))
    objs = [ObjectInstance(i, "sphere", {"radius": r}, c) for i, c in enumerate(centers)]
    scene = SceneState(BOWL, objs)
    got = penetration_set(scene, hand)
    oracle = 0
    for o in objs:
        pts = _sphere_surface(o.position, 14.0)
        for lk in hand.links:
            inside = _inside_palm(pts, lk) if lk.segment == "palm" else _inside_capsule(pts, lk.start, lk.end, lk.shape.radius)
            oracle += bool(inside.any())
    for i in range(len(objs)):
        for j in range(i + 1, len(objs)):
            pts = _sphere_surface(objs[i].position, r)
            oracle += bool((np.linalg.norm(pts - objs[j].position, axis=1) < r).any())
    assert oracle >= 4
    assert len(got) == oracle


def test_pair_distance_symmetric():
    a = ObjectInstance(0, "cuboid", {"edge": 20.0}, [0, 0, 0], [0.9, 0.1, 0.3, 0.2])
    b = ObjectInstance(1, "cylinder", {"radius": 5.0, "height": 20.0}, [14.0, 3.0, 2.0])
    d1 = pair_distance(a.shape, a.pose, b.shape, b.pose).distance
    d2 = pair_distance(b.shape, b.pose, a.shape, a.pose).distance
    assert d1 == pytest.approx(d2, abs=1e-6)
