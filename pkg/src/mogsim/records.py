"""Grasp record schema (version 1) and its JSON serialization.

A record is one self-contained JSON document.  Keys are sorted and floats
are written with ``repr`` precision, so serialize -> parse -> serialize is
byte-identical.  Unknown keys are ignored on load.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

__all__ = [
    "SCHEMA",
    "SCHEMA_VERSION",
    "RecordValidationError",
    "GraspRecord",
    "record_to_json",
    "record_from_json",
    "validate_record",
    "load_record",
    "save_record",
]

SCHEMA = "mogsim.grasp-record"
SCHEMA_VERSION = 1

_HOLD_TAGS = {"force-closed", "contained", "supported", "free"}
_REGIONS = {"fingertip", "finger-link", "finger-side", "palm", "object"}


class RecordValidationError(ValueError):
    """A record does not conform to the schema; ``fields`` lists offenders."""

    def __init__(self, problems):
        self.fields = [p[0] for p in problems]
        self.problems = problems
        super().__init__("; ".join(f"{k}: {msg}" for k, msg in problems))


@dataclass
class GraspRecord:
    seed: int | None = None
    pile_seed: int | None = None
    master_seed: int | None = None
    trial_index: int | None = None
    shape: str | None = None
    policy: dict | None = None
    thresholds: dict | None = None
    geometry: dict | None = None
    approach: dict | None = None
    wrist_pose: dict | None = None
    friction: dict | None = None
    initial_scene: str | None = None
    final_scene: str | None = None
    trajectory: list | None = None
    final_config: dict = field(default_factory=lambda: {"spread": 0.0, "base": [0.0, 0.0, 0.0]})
    steps: int = 0
    step_capped: bool = False
    stop_counter: int = 0
    torque_stopped: list = field(default_factory=lambda: [False, False, False])
    torque_frozen: list = field(default_factory=lambda: [False, False, False])
    contacts: list = field(default_factory=list)
    holds: dict = field(default_factory=dict)
    held: list = field(default_factory=list)
    held_count: int = 0
    taxels: list | None = None
    labels: dict | None = None

    @property
    def success(self):
        return self.held_count >= 2

    def to_dict(self):
        d = asdict(self)
        d["schema"] = SCHEMA
        d["version"] = SCHEMA_VERSION
        d["success"] = self.success
        return d

    @classmethod
    def from_dict(cls, d):
        validate_record(d)
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def to_json(self):
        return record_to_json(self)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate_record(d):
    """Raise ``RecordValidationError`` listing every schema violation."""
    problems = []
    if not isinstance(d, dict):
        raise RecordValidationError([("<root>", "record must be a JSON object")])
    if d.get("schema", SCHEMA) != SCHEMA:
        problems.append(("schema", f"expected {SCHEMA!r}"))
    version = d.get("version", SCHEMA_VERSION)
    if not isinstance(version, int) or version > SCHEMA_VERSION or version < 1:
        problems.append(("version", f"unsupported version {version!r}"))
    fc = d.get("final_config")
    if not isinstance(fc, dict) or not _is_num(fc.get("spread")) or not (
        isinstance(fc.get("base"), list) and len(fc["base"]) == 3 and all(_is_num(b) for b in fc["base"])
    ):
        problems.append(("final_config", "needs numeric 'spread' and a 3-element numeric 'base'"))
    contacts = d.get("contacts", [])
    if not isinstance(contacts, list):
        problems.append(("contacts", "must be a list"))
    else:
        for i, c in enumerate(contacts):
            if not isinstance(c, dict):
                problems.append((f"contacts[{i}]", "must be an object"))
                continue
            for key in ("body_a", "body_b", "point", "normal", "depth"):
                if key not in c:
                    problems.append((f"contacts[{i}].{key}", "missing"))
            if c.get("region", "object") not in _REGIONS:
                problems.append((f"contacts[{i}].region", f"unknown region {c.get('region')!r}"))
            for key in ("point", "normal"):
                v = c.get(key)
                if key in c and not (isinstance(v, list) and len(v) == 3 and all(_is_num(x) for x in v)):
                    problems.append((f"contacts[{i}].{key}", "must be 3 numbers"))
            if "depth" in c and not (_is_num(c["depth"]) and c["depth"] >= 0):
                problems.append((f"contacts[{i}].depth", "must be a non-negative number"))
    holds = d.get("holds", {})
    if not isinstance(holds, dict):
        problems.append(("holds", "must be an object keyed by object id"))
    else:
        for k, h in holds.items():
            if not isinstance(h, dict) or h.get("tag") not in _HOLD_TAGS:
                problems.append((f"holds.{k}", "needs a 'tag' in " + ", ".join(sorted(_HOLD_TAGS))))
    held = d.get("held", [])
    count = d.get("held_count", len(held) if isinstance(held, list) else 0)
    if not isinstance(held, list):
        problems.append(("held", "must be a list"))
    elif not isinstance(count, int) or count != len(held):
        problems.append(("held_count", "must equal the number of held objects"))
    if "success" in d and isinstance(count, int) and d["success"] != (count >= 2):
        problems.append(("success", "must equal held_count >= 2"))
    taxels = d.get("taxels")
    if taxels is not None and not (isinstance(taxels, list) and len(taxels) == 96):
        problems.append(("taxels", "must hold 96 values"))
    if problems:
        raise RecordValidationError(problems)


def record_to_json(record):
    return json.dumps(record.to_dict(), sort_keys=True, indent=1, allow_nan=False) + "\n"


def record_from_json(text):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RecordValidationError([("<root>", f"invalid JSON: {exc}")]) from None
    return GraspRecord.from_dict(d)


def load_record(path):
    with open(path, encoding="utf-8") as fh:
        return record_from_json(fh.read())


def save_record(record, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(record_to_json(record))
