"""
Labeling grasps
===============

A grasp is summarized by a few categorical features and scored against a
rule table with one row per grasp type.  Records holding several
independently held groups of objects get one label per group.
"""
from mogsim import FeatureVector, build_taxonomy, classify_type, label_record, score_types

# The type tree
print(build_taxonomy().render())

# A fingertip pinch with the fingers spread wide
f = FeatureVector("yes", "fully-abducted", "resistance-based", {"fingertip"}, "force-closure", {1, 2})
print("\npinch ->", [t.value for t in classify_type(f)])
print("scores:", {t.value: s for t, s in score_types(f).items() if s >= 5})

# A record with two objects, each clipped by one finger against the palm
def contact(obj, finger):
    link = "palm" if finger == 0 else f"f{finger}.proximal"
    region = "palm" if finger == 0 else "finger-link"
    return {"body_a": obj, "body_b": link, "point": [0, 0, 0], "normal": [0, 0, 1], "depth": 0.5,
            "region": region, "finger": finger or None}


record = {
    "final_config": {"spread": 90.0, "base": [70.0, 70.0, 10.0]},
    "torque_stopped": [True, True, False],
    "contacts": [contact(0, 1), contact(0, 0), contact(1, 2), contact(1, 0)],
    "holds": {"0": {"tag": "force-closed", "supporting": ["f1.proximal", "palm"]},
              "1": {"tag": "force-closed", "supporting": ["f2.proximal", "palm"]}},
    "held": [0, 1],
}
labels = label_record(record)
print("\nwhole record ->", labels["types"])
for cell in labels["combinations"]:
    print(f"  objects {cell['objects']}: {cell['type']} (score {cell['score']})")
print("combination:", labels["combination"])
