"""
One grasp in a pile of spheres
==============================

Settle 30 spheres in a bowl, push the hand in, close it with the
stochastic routine, lift, and count what is still held.
"""
from collections import Counter

from mogsim import label_record, run_grasp_trial, settle_pile
from mogsim.scene import Container, ShapeSpec

bowl = Container("bowl", radius=60.0)
pile = settle_pile(bowl, ShapeSpec("sphere", "large"), 30, seed=1)
top = max(o.position[2] for o in pile.objects)
print(f"{len(pile.objects)} spheres settled, pile top at z={top:.1f} mm")

for seed in range(4):
    rec = run_grasp_trial(pile, seed=seed)
    regions = Counter(c["region"] for c in rec.contacts if c["region"] != "object")
    tags = Counter(h["tag"] for h in rec.holds.values())
    tags.pop("free", None)
    print(f"\nseed {seed}: {rec.steps} steps, spread {rec.final_config['spread']:.0f} deg, "
          f"held {rec.held_count} {'(success)' if rec.success else ''}")
    print(f"  hand contact regions: {dict(regions)}")
    print(f"  hold tags: {dict(tags)}")
    if rec.held_count:
        labels = label_record(rec)
        print(f"  type(s): {labels['types']}  combination: {labels['combination']}")
