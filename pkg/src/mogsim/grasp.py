"""Biased-random-walk closing routine and the grasp trial loop.

Each step every finger that is not stopped by resistance moves its base joint
by a flex, extend or stay increment drawn from the policy; the coupled joint
follows at one third.  A trial inserts the hand palm-down into the pile,
runs the routine until every finger has been stopped ``stop_count_limit``
times, then lifts and counts the objects that stay in the hand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .closure import FrictionModel, evaluate_holds
from .contacts import detect_contacts, taxel_map, torque_proxy
from .geometry import Pose, quat_from_axis_angle, quat_multiply
from .hand import HandConfiguration, HandGeometry, JointLimits, forward_kinematics
from .records import GraspRecord
from .scene import SLOP, relax, scene_to_text

__all__ = [
    "StochasticPolicy",
    "TrialState",
    "Approach",
    "SimulationOptions",
    "sample_step",
    "sample_steps",
    "step_routine",
    "palm_down_pose",
    "insert_hand",
    "lift_and_count",
    "run_grasp_trial",
]


@dataclass(frozen=True)
class StochasticPolicy:
    """Flex/extend/stay step distribution plus resistance stopping rules.

    Torque thresholds are drawn per trial, uniformly from the given ranges,
    unless fixed values are supplied.
    """

    p: float = 0.7
    q: float = 0.1
    d_fw: float = 3.0
    d_bw: float = -3.0
    d_stay: float = 0.0
    th_base_range: tuple = (0.5, 2.0)
    th_coupled_range: tuple = (0.5, 2.0)
    th_base: float | None = None
    th_coupled: float | None = None
    stop_count_limit: int = 4
    step_cap: int = 500
    k_torque: float = 1.0

    def __post_init__(self):
        if self.p < 0 or self.q < 0 or self.p + self.q > 1 + 1e-12:
            raise ValueError("need p >= 0, q >= 0 and p + q <= 1")
        if not self.d_fw > 0:
            raise ValueError("d_fw must be positive")
        if not self.d_bw < 0:
            raise ValueError("d_bw must be negative")
        if self.d_stay != 0:
            raise ValueError("d_stay must be 0")
        for name in ("th_base_range", "th_coupled_range"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if self.stop_count_limit < 1 or self.step_cap < 1:
            raise ValueError("stop_count_limit and step_cap must be positive")

    @property
    def expected_step(self):
        return self.p * self.d_fw + self.q * self.d_bw

    def draw_thresholds(self, rng):
        """Per-trial thresholds; always consumes two uniform draws."""
        u = rng.random(2)
        lo, hi = self.th_base_range
        tb = self.th_base if self.th_base is not None else lo + (hi - lo) * u[0]
        lo, hi = self.th_coupled_range
        tc = self.th_coupled if self.th_coupled is not None else lo + (hi - lo) * u[1]
        return float(tb), float(tc)

    def to_dict(self):
        return {
            "p": self.p,
            "q": self.q,
            "d_fw": self.d_fw,
            "d_bw": self.d_bw,
            "d_stay": self.d_stay,
            "th_base_range": list(self.th_base_range),
            "th_coupled_range": list(self.th_coupled_range),
            "th_base": self.th_base,
            "th_coupled": self.th_coupled,
            "stop_count_limit": self.stop_count_limit,
            "step_cap": self.step_cap,
            "k_torque": self.k_torque,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("th_base_range", "th_coupled_range"):
            if key in d:
                d[key] = tuple(d[key])
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


def sample_step(policy, rng):
    """One step increment in degrees, from exactly one uniform draw."""
    u = rng.random()
    if u < policy.p:
        return policy.d_fw
    if u < policy.p + policy.q:
        return policy.d_bw
    return policy.d_stay


def sample_steps(policy, rng, n):
    """Vectorized ``sample_step``: ``n`` increments from ``n`` uniform draws."""
    u = rng.random(n)
    return np.where(u < policy.p, policy.d_fw, np.where(u < policy.p + policy.q, policy.d_bw, policy.d_stay))


@dataclass
class TrialState:
    config: HandConfiguration
    rng: np.random.Generator
    th_base: float = 1.0
    th_coupled: float = 1.0
    frozen: tuple = (False, False, False)
    stopped: tuple = (False, False, False)
    counter: int = 0
    step: int = 0
    terminated: bool = False
    step_capped: bool = False
    torque_stops: tuple = (False, False, False)


def step_routine(state, contacts, policy, limits=JointLimits()):
    """Advance the closing routine by one step.

    ``contacts`` are the current contacts (only hand contacts matter).  A
    finger whose base torque proxy reaches ``th_base`` holds its base joint
    this step; if its coupled torque proxy also reaches ``th_coupled`` it is
    stopped for the rest of the trial.  Every finger consumes one draw per
    step, moving or not, so fingers' random streams stay aligned.
    """
    if state.terminated:
        raise ValueError("trial already terminated")
    steps = [sample_step(policy, state.rng) for _ in range(3)]
    base = list(state.config.base)
    frozen = list(state.frozen)
    stopped = list(state.stopped)
    torque_stops = list(state.torque_stops)
    halted = [False, False, False]
    lo, hi = limits.base
    for i in range(3):
        if stopped[i]:
            halted[i] = True
            continue
        tb = torque_proxy(contacts, i + 1, "base", policy.k_torque)
        frozen[i] = tb >= state.th_base
        if frozen[i]:
            halted[i] = True
            torque_stops[i] = True
            if torque_proxy(contacts, i + 1, "coupled", policy.k_torque) >= state.th_coupled:
                stopped[i] = True
            continue
        target = base[i] + steps[i]
        if steps[i] > 0 and base[i] >= hi:
            halted[i] = True
        base[i] = min(max(target, lo), hi)
    counter = state.counter + (1 if all(halted) else 0)
    step = state.step + 1
    terminated = counter >= policy.stop_count_limit
    capped = not terminated and step >= policy.step_cap
    return replace(
        state,
        config=HandConfiguration(state.config.spread, tuple(base)),
        frozen=tuple(frozen),
        stopped=tuple(stopped),
        counter=counter,
        step=step,
        terminated=terminated or capped,
        step_capped=capped,
        torque_stops=tuple(torque_stops),
    )


@dataclass(frozen=True)
class Approach:
    """Palm-down wrist placement: yaw about the vertical, xy offset, fingertip depth."""

    yaw: float = 0.0
    x: float = 0.0
    y: float = 0.0
    spread: float | None = None
    depth: float | None = None

    def to_dict(self):
        return {"yaw": self.yaw, "x": self.x, "y": self.y, "spread": self.spread, "depth": self.depth}


@dataclass(frozen=True)
class SimulationOptions:
    friction: FrictionModel = FrictionModel()
    containment_directions: int = 64
    relax_iterations: int = 500
    relax_tol: float = 1e-5
    nudge_iterations: int = 10
    insert_step: float = 2.0
    insert_resistance: float = 3.0
    gravity_nudge: float = 0.05
    keep_trajectory: bool = True


def palm_down_pose(x, y, z, yaw_deg):
    """Wrist pose with the palm facing -z, rotated by ``yaw_deg`` about +z."""
    flip = quat_from_axis_angle([1.0, 0.0, 0.0], math.pi)
    yaw = quat_from_axis_angle([0.0, 0.0, 1.0], math.radians(yaw_deg))
    return Pose([x, y, z], quat_multiply(yaw, flip))


def _reach(geometry):
    return geometry.proximal_length + geometry.distal_length + geometry.link_radius


def _obstacles(hand):
    return [(lk.shape, lk.pose) for lk in hand.links]


def _movable(scene, hand, margin):
    center = hand.wrist_pose.position
    reach = _reach(hand.geometry) + hand.geometry.palm_radius + margin
    return np.array([np.linalg.norm(o.position - center) <= reach for o in scene.objects], dtype=bool)


def _settle_around(scene, hand, options, nudge=None):
    """Relax objects near the hand: gravity-nudged passes, then clean-up passes."""
    if not scene.objects:
        return scene
    D = 2.0 * max(o.shape.bounding_radius for o in scene.objects)
    mov = _movable(scene, hand, 2.0 * D)
    obstacles = _obstacles(hand)
    nudge = options.gravity_nudge if nudge is None else nudge
    pos = scene.positions()
    mu = options.friction.mu
    if nudge:
        pos = relax(scene.objects, pos, scene.container, obstacles, movable=mov, iterations=options.nudge_iterations,
                    gravity=scene.gravity, nudge=nudge, slop=SLOP, mu=mu)
    pos = relax(scene.objects, pos, scene.container, obstacles, movable=mov, iterations=options.relax_iterations,
                gravity=scene.gravity, slop=SLOP, tol=options.relax_tol, mu=mu)
    return scene.with_positions(pos)


def insert_hand(scene, config, geometry, approach, options=SimulationOptions()):
    """Guarded palm-down descent into the pile.

    The palm face descends toward ``approach.depth`` below the pile top
    (default: one object diameter), pushing objects aside.  The descent is
    clamped so the fingertips stay 1 mm above the floor, and stops early
    when objects can no longer make way (residual penetration above
    ``options.insert_resistance`` mm).  Returns ``(wrist_pose, scene)``.
    """
    reach = _reach(geometry)
    top = scene.top_height()
    if scene.objects:
        D = 2.0 * max(o.shape.bounding_radius for o in scene.objects)
    else:
        D = 0.0
    depth = approach.depth if approach.depth is not None else D
    z = max(top, 0.0) + reach + 1.0
    z_target = max(top - depth, reach + 1.0)
    pose = palm_down_pose(approach.x, approach.y, z, approach.yaw)
    while z > z_target:
        z_next = max(z - options.insert_step, z_target)
        trial_pose = palm_down_pose(approach.x, approach.y, z_next, approach.yaw)
        hand = forward_kinematics(config, geometry, trial_pose)
        moved = _settle_around(scene, hand, options, nudge=0.0)
        contacts = detect_contacts(hand, moved, include_objects=False)
        if any(c.depth > options.insert_resistance for c in contacts):
            break
        scene, pose, z = moved, trial_pose, z_next
    return pose, scene


def lift_and_count(hand, scene, contacts=None, friction=FrictionModel(), K=64, seed=0):
    """Hold statuses after lifting; returns ``(held ids, count, statuses)``."""
    if contacts is None:
        contacts = detect_contacts(hand, scene, include_container=False)
    statuses = evaluate_holds(scene, hand, contacts, friction, K=K, seed=seed)
    held = sorted((oid for oid, st in statuses.items() if st.held), key=lambda v: (str(type(v)), v))
    return held, len(held), statuses


def run_grasp_trial(scene, policy=StochasticPolicy(), approach=None, seed=0, geometry=HandGeometry(),
                    limits=JointLimits(), options=SimulationOptions(), master_seed=None, trial_index=None):
    """Insert, close with the stochastic routine, lift and count.

    Deterministic for a fixed ``seed``.  When ``approach`` is ``None`` the
    spread, yaw and xy offset are drawn from the trial RNG.
    """
    rng = np.random.default_rng(seed)
    th_base, th_coupled = policy.draw_thresholds(rng)
    u = rng.random(4)
    if approach is None:
        jitter = 0.25 * (scene.container.radius if scene.container.kind == "bowl" else
                         min(scene.container.half_x, scene.container.half_y))
        r = jitter * math.sqrt(u[2])
        approach = Approach(yaw=360.0 * u[1], x=r * math.cos(2 * math.pi * u[3]), y=r * math.sin(2 * math.pi * u[3]),
                            spread=180.0 * u[0])
    spread = approach.spread if approach.spread is not None else 180.0 * u[0]
    lo, hi = limits.spread
    spread = min(max(spread, lo), hi)
    config = HandConfiguration(spread, (limits.base[0],) * 3)
    initial_text = scene_to_text(scene)

    wrist, scene = insert_hand(scene, config, geometry, approach, options)
    state = TrialState(config, rng, th_base, th_coupled)
    trajectory = [[config.spread, *config.base]]
    hand = forward_kinematics(config, geometry, wrist)
    contacts = detect_contacts(hand, scene, include_objects=False)
    while not state.terminated:
        state = step_routine(state, contacts, policy, limits)
        hand = forward_kinematics(state.config, geometry, wrist)
        scene = _settle_around(scene, hand, options)
        contacts = detect_contacts(hand, scene, include_objects=False)
        if options.keep_trajectory:
            trajectory.append([state.config.spread, *state.config.base])

    final_contacts = detect_contacts(hand, scene, include_container=False)
    held, count, statuses = lift_and_count(hand, scene, final_contacts, options.friction,
                                           K=options.containment_directions, seed=seed)
    return GraspRecord(
        seed=int(seed),
        master_seed=master_seed,
        trial_index=trial_index,
        policy=policy.to_dict(),
        thresholds={"th_base": th_base, "th_coupled": th_coupled},
        geometry=geometry.to_dict(),
        approach={**approach.to_dict(), "spread": spread},
        wrist_pose={"position": [float(v) for v in wrist.position], "quaternion": [float(v) for v in wrist.quaternion]},
        friction={"mu": options.friction.mu, "k_edges": options.friction.k_edges},
        initial_scene=initial_text,
        final_scene=scene_to_text(scene),
        trajectory=trajectory if options.keep_trajectory else None,
        final_config={"spread": state.config.spread, "base": list(state.config.base),
                      "coupled": list(state.config.coupled)},
        steps=state.step,
        step_capped=state.step_capped,
        stop_counter=state.counter,
        torque_stopped=[bool(v) for v in state.stopped],
        torque_frozen=[bool(v) for v in state.torque_stops],
        contacts=[c.to_dict() for c in final_contacts],
        holds={str(oid): st.to_dict() for oid, st in sorted(statuses.items(), key=lambda kv: str(kv[0]))},
        held=[int(h) for h in held],
        held_count=count,
        taxels=[float(v) for v in taxel_map(final_contacts).flat()],
    )
