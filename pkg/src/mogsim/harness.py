"""Batch experiments: trial seeding, output layout, summaries and relabeling.

Output layout of ``run_batch`` (all files are deterministic for a fixed
configuration, so two runs with the same master seed are byte-identical)::

    out_dir/
        manifest.json            configuration echo and file list
        report.json              SummaryReport
        summary.csv              one row per shape/size
        held_counts.csv          held-count histogram
        types.csv                grasp type distribution
        combinations.csv         combination frequencies
        sphere-large/
            trial_00000.json     one GraspRecord per trial
"""
from __future__ import annotations

import csv
import io
import json
import os
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import Bucketing, NoGraspError, label_record
from .config import ExperimentConfig
from .grasp import SimulationOptions, run_grasp_trial
from .records import GraspRecord, RecordValidationError, load_record, record_from_json, record_to_json
from .scene import settle_pile

__all__ = [
    "TrialCapWarning",
    "GroupSummary",
    "SummaryReport",
    "Dataset",
    "trial_seed",
    "run_trial",
    "run_batch",
    "summarize",
    "classify_record",
    "classify_file",
    "write_dataset",
    "load_dataset",
]


ESCAPE_NOTE = "translational escape sampling over one bounding diameter; rotational escape is not checked"


class TrialCapWarning(UserWarning):
    """A shape group hit ``max_trials`` before reaching its success target."""


def trial_seed(master, label, trial, stream=0):
    """Stable 63-bit seed from the master seed, group label and trial index."""
    ss = np.random.SeedSequence([int(master), zlib.crc32(label.encode("utf-8")), int(trial), int(stream)])
    hi, lo = ss.generate_state(2, np.uint32)
    return (int(hi) << 31) ^ int(lo)


def run_trial(config, spec, trial):
    """One trial of ``config`` for ``spec``: fresh pile, grasp, labels."""
    label = spec.label
    pile_seed = trial_seed(config.master_seed, label, trial, 0)
    seed = trial_seed(config.master_seed, label, trial, 1)
    scene = settle_pile(config.make_container(), spec, config.pile_size, pile_seed)
    options = SimulationOptions(friction=config.make_friction(), keep_trajectory=config.keep_trajectory)
    record = run_grasp_trial(scene, config.make_policy(), seed=seed, options=options,
                             master_seed=config.master_seed, trial_index=trial)
    record = replace(record, shape=label, pile_seed=pile_seed)
    record.labels = label_record(record, bucketing=config.make_bucketing())
    return record


def _run_trial_args(args):
    return run_trial(*args)


@dataclass
class GroupSummary:
    shape: str
    trials: int = 0
    successes: int = 0
    held_histogram: dict = field(default_factory=dict)
    types: dict = field(default_factory=dict)
    combinations: dict = field(default_factory=dict)
    human_hand_types: dict = field(default_factory=dict)
    trial_cap_reached: bool = False

    @property
    def success_rate(self):
        return self.successes / self.trials if self.trials else 0.0

    def to_dict(self):
        return {
            "shape": self.shape,
            "trials": self.trials,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "held_histogram": {str(k): v for k, v in sorted(self.held_histogram.items())},
            "types": dict(sorted(self.types.items())),
            "combinations": dict(sorted(self.combinations.items())),
            "human_hand_types": dict(sorted(self.human_hand_types.items())),
            "trial_cap_reached": self.trial_cap_reached,
        }


@dataclass
class SummaryReport:
    groups: list = field(default_factory=list)
    rejects: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def trials(self):
        return sum(g.trials for g in self.groups)

    @property
    def successes(self):
        return sum(g.successes for g in self.groups)

    @property
    def success_rate(self):
        return self.successes / self.trials if self.trials else 0.0

    def group(self, shape):
        for g in self.groups:
            if g.shape == shape:
                return g
        raise KeyError(shape)

    def to_dict(self):
        return {
            "trials": self.trials,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "groups": [g.to_dict() for g in self.groups],
            "rejects": list(self.rejects),
            "warnings": list(self.warnings),
            "config": self.config,
            "escape_bound": ESCAPE_NOTE,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def to_text(self):
        # Header: the method constants every count below depends on.
        lines = [f"containment: {ESCAPE_NOTE}"]
        b = self.config.get("bucketing")
        if b:
            lines.append("bucketing: " + ", ".join(f"{k}={v}" for k, v in sorted(b.items())))
        if "friction" in self.config:
            lines.append(f"friction: mu={self.config['friction'].get('mu')}")
        lines.append("")
        for g in self.groups:
            lines.append(f"{g.shape}: {g.successes}/{g.trials} successes ({g.success_rate:.3f})"
                         + ("  [trial cap reached]" if g.trial_cap_reached else ""))
            hist = ", ".join(f"{k}:{v}" for k, v in sorted(g.held_histogram.items()))
            lines.append(f"  held counts  {hist}")
            for name, n in sorted(g.types.items(), key=lambda kv: (-kv[1], kv[0])):
                note = "  (human-hand type)" if name in g.human_hand_types else ""
                lines.append(f"  {name:<26} {n}{note}")
            for name, n in sorted(g.combinations.items(), key=lambda kv: (-kv[1], kv[0])):
                lines.append(f"  combo {name:<40} {n}")
        if self.rejects:
            lines.append(f"rejects: {len(self.rejects)}")
            for r in self.rejects:
                lines.append(f"  {r['source']}: {r['error']}")
        return "\n".join(lines) + "\n"


@dataclass
class Dataset:
    """Records grouped by shape label, in trial order."""

    groups: dict = field(default_factory=dict)

    def records(self):
        for recs in self.groups.values():
            yield from recs

    def __len__(self):
        return sum(len(v) for v in self.groups.values())


def run_batch(config: ExperimentConfig, out_dir=None, progress=None):
    """Run trials per shape group until the success target or the trial cap.

    Trials are dispatched in chunks of ``config.workers``; results are
    consumed in trial order and everything after the trial that reaches the
    target is discarded, so the dataset does not depend on the worker count.
    Returns ``(dataset, report)`` and writes the output layout when
    ``out_dir`` (or ``config.out_dir``) is set.
    """
    dataset = Dataset()
    warn = []
    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for spec in config.shapes:
            recs = []
            successes = 0
            trial = 0
            while trial < config.max_trials and successes < config.success_target:
                n = min(config.workers, config.max_trials - trial)
                args = [(config, spec, t) for t in range(trial, trial + n)]
                results = pool.map(_run_trial_args, args) if pool else map(_run_trial_args, args)
                for rec in results:
                    if successes >= config.success_target:
                        break
                    recs.append(rec)
                    successes += rec.success
                    if progress:
                        progress(spec.label, rec)
                trial += n
            dataset.groups[spec.label] = recs
            if successes < config.success_target and config.max_trials > 0:
                msg = f"{spec.label}: trial cap {config.max_trials} reached with {successes} successes"
                warnings.warn(msg, TrialCapWarning, stacklevel=2)
                warn.append(msg)
    finally:
        if pool:
            pool.shutdown()
    report = summarize(dataset, config.to_dict())
    report.warnings = warn
    for g in report.groups:
        g.trial_cap_reached = any(w.startswith(g.shape + ":") for w in warn)
    out_dir = out_dir if out_dir is not None else config.out_dir
    if out_dir:
        write_dataset(dataset, report, out_dir, config)
    return dataset, report


def _tally(group, rec):
    group.trials += 1
    group.successes += rec.success
    group.held_histogram[rec.held_count] = group.held_histogram.get(rec.held_count, 0) + 1
    labels = rec.labels or {}
    for name in dict.fromkeys(labels.get("types", [])):
        group.types[name] = group.types.get(name, 0) + 1
    for name in dict.fromkeys(labels.get("human_hand_type", [])):
        group.human_hand_types[name] = group.human_hand_types.get(name, 0) + 1
    combo = labels.get("combination")
    if combo and len(labels.get("combinations", [])) > 1:
        group.combinations[combo] = group.combinations.get(combo, 0) + 1


def summarize(dataset, config=None):
    """Aggregate a dataset into a ``SummaryReport``.

    ``dataset`` is a ``Dataset`` or a mapping of group label to a list of
    ``GraspRecord``s, dicts or JSON strings.  Anything that fails to parse
    is listed under ``rejects`` and skipped.  Each record counts every one of
    its top (tied) type labels once.
    """
    groups = dataset.groups if isinstance(dataset, Dataset) else dataset
    report = SummaryReport(config=dict(config or {}))
    for label, items in groups.items():
        g = GroupSummary(label)
        for i, item in enumerate(items):
            source = f"{label}[{i}]"
            try:
                rec = _as_record(item)
            except RecordValidationError as exc:
                report.rejects.append({"source": getattr(item, "source", source), "error": str(exc)})
                continue
            _tally(g, rec)
        report.groups.append(g)
    return report


def _as_record(item):
    if isinstance(item, GraspRecord):
        return item
    if isinstance(item, str):
        return record_from_json(item)
    if isinstance(item, _Unparsed):
        raise item.error
    return GraspRecord.from_dict(item)


@dataclass
class _Unparsed:
    source: str
    error: Exception


def _csv(rows, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def write_dataset(dataset, report, out_dir, config=None):
    """Write records, report, manifest and CSV tables under ``out_dir``."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        files = {}
        for label, recs in dataset.groups.items():
            d = os.path.join(out_dir, label)
            os.makedirs(d, exist_ok=True)
            names = []
            for rec in recs:
                name = f"trial_{rec.trial_index:05d}.json"
                _write(os.path.join(d, name), record_to_json(rec))
                names.append(f"{label}/{name}")
            files[label] = names
        _write(os.path.join(out_dir, "report.json"), report.to_json())
        _write(os.path.join(out_dir, "report.txt"), report.to_text())
        manifest = {
            "config": config.to_dict() if config is not None else report.config,
            "groups": {g.shape: {"trials": g.trials, "successes": g.successes, "records": files.get(g.shape, [])}
                       for g in report.groups},
            "tables": ["summary.csv", "held_counts.csv", "types.csv", "combinations.csv"],
            "report": "report.json",
        }
        _write(os.path.join(out_dir, "manifest.json"), json.dumps(manifest, sort_keys=True, indent=1) + "\n")
        _write(os.path.join(out_dir, "summary.csv"), _csv(
            [[g.shape, g.trials, g.successes, repr(g.success_rate), int(g.trial_cap_reached)] for g in report.groups],
            ["shape", "trials", "successes", "success_rate", "trial_cap_reached"]))
        _write(os.path.join(out_dir, "held_counts.csv"), _csv(
            [[g.shape, k, v] for g in report.groups for k, v in sorted(g.held_histogram.items())],
            ["shape", "held_count", "trials"]))
        _write(os.path.join(out_dir, "types.csv"), _csv(
            [[g.shape, k, v] for g in report.groups for k, v in sorted(g.types.items())],
            ["shape", "type", "count"]))
        _write(os.path.join(out_dir, "combinations.csv"), _csv(
            [[g.shape, k, v] for g in report.groups for k, v in sorted(g.combinations.items())],
            ["shape", "combination", "count"]))
    except OSError as exc:
        raise OSError(f"cannot write dataset to {out_dir!r}: {exc}") from exc


def load_dataset(out_dir):
    """Read every record file under ``out_dir``; unparsable files become rejects in ``summarize``."""
    ds = Dataset()
    for entry in sorted(os.listdir(out_dir)):
        d = os.path.join(out_dir, entry)
        if not os.path.isdir(d):
            continue
        items = []
        for name in sorted(os.listdir(d)):
            if not name.endswith(".json"):
                continue
            path = os.path.join(d, name)
            try:
                items.append(load_record(path))
            except RecordValidationError as exc:
                items.append(_Unparsed(path, exc))
        ds.groups[entry] = items
    return ds


def classify_record(record, bucketing=Bucketing(), require_grasp=True):
    """Return a copy of ``record`` with a fresh ``labels`` block.

    Raises ``NoGraspError`` when ``require_grasp`` and nothing is held.
    """
    labels = label_record(record, bucketing=bucketing)
    if require_grasp and labels["no_grasp"]:
        raise NoGraspError("record holds no objects in contact with the hand")
    return replace(record, labels=labels)


def classify_file(path, out_path=None, bucketing=Bucketing()):
    """Relabel the record at ``path``; writes back in place unless ``out_path`` is given.

    Only the ``labels`` key changes; unknown keys are kept as they are.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RecordValidationError([("<root>", f"invalid JSON: {exc}")]) from None
    rec = classify_record(GraspRecord.from_dict(raw), bucketing)
    raw["labels"] = rec.labels
    with open(out_path or path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(raw, sort_keys=True, indent=1, allow_nan=False) + "\n")
    return rec
