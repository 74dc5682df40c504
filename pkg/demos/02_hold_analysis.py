"""
Why an object stays in the hand
===============================

After lifting, each object gets one tag, checked in order: force-closed,
contained, supported, or free.
"""
import numpy as np

from mogsim import HandConfiguration, forward_kinematics
from mogsim.closure import containment_test, force_closure
from mogsim.grasp import lift_and_count
from mogsim.scene import Container, ObjectInstance, SceneState

# Force closure: two antipodal contacts cannot stop spin about their axis
pts = np.array([[0, 0, 10.0], [0, 0, -10.0]])
res = force_closure(pts, -pts / 10.0, np.zeros(3), 10.0, mu=0.5)
print(f"antipodal pair:   closed={res.closed}")

# four contacts at tetrahedron vertices resist every wrench
tet = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)
res = force_closure(10 * tet, -tet, np.zeros(3), 10.0, mu=0.5)
print(f"tetrahedral four: closed={res.closed}  epsilon={res.epsilon:.4f}")

bowl = Container("bowl", radius=60.0)

# Containment: a small sphere tucked under partly flexed fingers
fist = forward_kinematics(HandConfiguration(150.0, (48.0, 45.0, 51.0)))
ball = ObjectInstance(0, "sphere", {"radius": 8.4}, np.array([27.0, 1.2, 15.3]))
links = [(lk.shape, lk.pose) for lk in fist.links]
print(f"fist sphere trapped: {containment_test(ball, links)}")
_, _, status = lift_and_count(fist, SceneState(bowl, [ball]))
print(f"fist sphere tag:     {status[0].tag}")

# Support: the same sphere on an open, upward-facing palm
flat = forward_kinematics(HandConfiguration())
ball = ObjectInstance(0, "sphere", {"radius": 10.0}, np.array([0.0, 0.0, 9.8]))
_, _, status = lift_and_count(flat, SceneState(bowl, [ball]))
print(f"palm sphere tag:     {status[0].tag}  (supported by {status[0].supporting})")
