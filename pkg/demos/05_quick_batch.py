"""
A small batch experiment
========================

Run grasp trials on a 30-sphere pile until ten of them hold two or more
objects, then print the summary report.  Pass a directory to keep the
records and CSV tables.
"""
import sys

from mogsim.config import ExperimentConfig
from mogsim.harness import run_batch

out = sys.argv[1] if len(sys.argv) > 1 else None
config = ExperimentConfig(master_seed=0, pile_size=30, success_target=10, max_trials=500)


def progress(label, rec):
    mark = "*" if rec.success else " "
    print(f"{mark} {label} trial {rec.trial_index:3d}: held {rec.held_count}")


dataset, report = run_batch(config, out_dir=out, progress=progress)
print()
print(report.to_text())
