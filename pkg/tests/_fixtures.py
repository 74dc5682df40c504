"""Hand-built scenes shared by several test modules."""
import numpy as np

from mogsim.hand import HandConfiguration, forward_kinematics
from mogsim.scene import Container, ObjectInstance, SceneState

BOWL = Container("bowl", radius=60.0)

# Small sphere tucked under partly flexed fingers; trapped in every direction.
FIST_CONFIG = HandConfiguration(150.0, (48.0, 45.0, 51.0))
FIST_SPHERE = (8.4, (27.0, 1.2, 15.3))


def sphere(i, center, r=10.0):
    return ObjectInstance(i, "sphere", {"radius": float(r)}, np.asarray(center, dtype=float))


def fist_scene(extra=()):
    hand = forward_kinematics(FIST_CONFIG)
    r, c = FIST_SPHERE
    return hand, SceneState(BOWL, [sphere(0, c, r), *extra])


def open_palm_scene():
    """Sphere resting on the upward-facing palm."""
    hand = forward_kinematics(HandConfiguration())
    return hand, SceneState(BOWL, [sphere(0, [0.0, 0.0, 9.8])])


def track_scene():
    """Two parallel horizontal fingers with a sphere resting in the groove between them."""
    hand = forward_kinematics(HandConfiguration(180.0, (90.0, 90.0, 0.0)))
    z = float(np.sqrt(32.0 ** 2 - 25.0 ** 2)) - 0.3
    return hand, SceneState(BOWL, [sphere(0, [60.0, 0.0, z], 20.0)])


# -- constructed records for the classifier ------------------------------------

def hand_contact(obj, finger, region, segment="distal"):
    link = "palm" if region == "palm" else f"f{finger}.{segment}"
    return {"body_a": obj, "body_b": link, "point": [0.0, 0.0, 0.0], "normal": [0.0, 0.0, 1.0], "depth": 0.5,
            "region": region, "finger": None if region == "palm" else finger,
            "segment": None if region == "palm" else segment}


def object_contact(a, b):
    return {"body_a": a, "body_b": b, "point": [0.0, 0.0, 0.0], "normal": [1.0, 0.0, 0.0], "depth": 0.2,
            "region": "object"}


def make_record(spread, base, contacts, holds, stopped=(True, True, True)):
    """A record dict with final state, contacts and hold tags ({id: (tag, supporting)})."""
    held = sorted(int(k) for k, (tag, _) in holds.items() if tag != "free")
    return {
        "final_config": {"spread": float(spread), "base": [float(b) for b in base]},
        "torque_stopped": list(stopped),
        "torque_frozen": list(stopped),
        "contacts": contacts,
        "holds": {str(k): {"tag": tag, "supporting": list(sup), "degenerate": False}
                  for k, (tag, sup) in holds.items()},
        "held": held,
        "held_count": len(held),
    }


def multiple_tt_pinches():
    # Thumb tip against each finger tip, one object per pair.
    contacts = [hand_contact(0, 1, "fingertip"), hand_contact(0, 3, "fingertip"),
                hand_contact(1, 2, "fingertip"), hand_contact(1, 3, "fingertip")]
    holds = {0: ("force-closed", ["f1.distal", "f3.distal"]), 1: ("force-closed", ["f2.distal", "f3.distal"])}
    return make_record(0.0, (50.0, 50.0, 50.0), contacts, holds)


def multiple_fp_clips():
    contacts = [hand_contact(0, 1, "finger-link", "proximal"), hand_contact(0, 0, "palm"),
                hand_contact(1, 2, "finger-link", "proximal"), hand_contact(1, 0, "palm")]
    holds = {0: ("force-closed", ["f1.proximal", "palm"]), 1: ("force-closed", ["f2.proximal", "palm"])}
    return make_record(90.0, (70.0, 70.0, 10.0), contacts, holds, stopped=(True, True, False))


def cylindrical_and_tt_pinch():
    # Three objects wrapped against the palm, a fourth pinched between two tips.
    contacts = [hand_contact(0, 1, "finger-link", "proximal"), hand_contact(0, 0, "palm"),
                hand_contact(1, 2, "finger-link", "proximal"), hand_contact(1, 0, "palm"),
                hand_contact(2, 3, "finger-link", "proximal"), hand_contact(2, 0, "palm"),
                object_contact(0, 1), object_contact(1, 2),
                hand_contact(3, 1, "fingertip"), hand_contact(3, 3, "fingertip")]
    holds = {0: ("contained", ["f1.proximal", "palm", "1"]),
             1: ("contained", ["f2.proximal", "palm", "0", "2"]),
             2: ("contained", ["f3.proximal", "palm", "1"]),
             3: ("force-closed", ["f1.distal", "f3.distal"])}
    return make_record(10.0, (60.0, 60.0, 60.0), contacts, holds)


def tracks_and_fp_clip():
    # One object rests across fingers 1 and 2, another is clipped by the thumb against the palm.
    contacts = [hand_contact(0, 1, "finger-link", "proximal"), hand_contact(0, 2, "finger-link", "proximal"),
                hand_contact(1, 3, "finger-link", "proximal"), hand_contact(1, 0, "palm")]
    holds = {0: ("supported", ["f1.proximal", "f2.proximal"]), 1: ("force-closed", ["f3.proximal", "palm"])}
    return make_record(40.0, (30.0, 30.0, 80.0), contacts, holds)


COMBINATION_FIXTURES = {
    "Multiple fingertip-fingertip pinches": (multiple_tt_pinches, ["FingertipFingertipPinch"] * 2),
    "Multiple finger-palm clips": (multiple_fp_clips, ["FingerPalmClip"] * 2),
    "Cylindrical & fingertip-fingertip pinch": (cylindrical_and_tt_pinch, ["Cylindrical", "FingertipFingertipPinch"]),
    "Tracks & finger-palm clip": (tracks_and_fp_clip, ["Tracks", "FingerPalmClip"]),
}


# One representative vector per rule-table row:
# (opposition, abduction, flexion, contacts, closure, fingers)
CANONICAL = {
    "Cylindrical": ("irrelevant-observed", "adducted", "resistance-based", {"finger-link", "palm"}, "containment",
                    {1, 2, 3}),
    "Funnel": ("yes", "partially-abducted", "small", {"finger-link", "fingertip"}, "containment", {1, 2, 3}),
    "Cup": ("no", "partially-abducted", "large", {"finger-link"}, "containment", {1, 2, 3}),
    "Tracks": ("yes", "partially-abducted", "small", {"finger-link"}, "containment", {1, 2}),
    "InverseBasket": ("yes", "partially-abducted", "small", {"finger-link", "palm"}, "force-closure", {1, 2, 3}),
    "Max": ("yes", "fully-abducted", "small", {"finger-link", "palm"}, "force-closure", {1, 2, 3}),
    "AbductionClip": ("irrelevant-observed", "partially-abducted", "small", {"finger-side"}, "force-closure", {1, 2}),
    "FingerPalmClip": ("irrelevant-observed", "partially-abducted", "resistance-based", {"finger-link", "palm"},
                       "force-closure", {1}),
    "FingerFingerClip": ("yes", "fully-abducted", "resistance-based", {"finger-link"}, "force-closure", {1, 2}),
    "FingertipFingertipPinch": ("yes", "fully-abducted", "resistance-based", {"fingertip"}, "force-closure", {1, 2}),
    "FingertipFingerPinch": ("yes", "fully-abducted", "resistance-based", {"fingertip", "finger-link"},
                             "force-closure", {1, 2}),
    "MultiFingerPinch": ("yes", "partially-abducted", "resistance-based", {"fingertip"}, "force-closure", {1, 2, 3}),
}

ALTERNATIVES = {
    "opposition": ("yes", "no", "irrelevant-observed"),
    "abduction": ("adducted", "partially-abducted", "fully-abducted"),
    "flexion": ("small", "large", "resistance-based"),
    "contacts": ({"fingertip"}, {"finger-link"}, {"finger-side"}, {"palm"}, {"finger-link", "palm"},
                 {"fingertip", "finger-link"}, {"fingertip", "palm"}, {"finger-side", "finger-link"}),
    "closure": ("containment", "force-closure"),
    "fingers": ({1}, {3}, {1, 2}, {2, 3}, {1, 2, 3}),
}
