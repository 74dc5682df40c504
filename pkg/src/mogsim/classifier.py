"""Rule-based labeling of multi-object grasps.

A grasp record is reduced to a small categorical feature vector, which is
scored against a rule table with one row per grasp type.  Every column that
matches adds one point and a ``*`` entry always matches, so the best types
are the rows with the highest count.  Ties are all reported, in table order.

The rule table lives in ``data/mog_rules.csv`` and can be replaced with
:func:`load_rules`.
"""
from __future__ import annotations

import csv
import enum
import io
from collections import Counter
from dataclasses import asdict, dataclass, field
from importlib import resources
from itertools import zip_longest

import numpy as np

from .hand import HandConfiguration, opposition_class

__all__ = [
    "MOGType",
    "SHAPE_BASED",
    "FUNCTION_BASED",
    "NoGraspError",
    "Rule",
    "Bucketing",
    "FeatureVector",
    "TaxonomyNode",
    "Cell",
    "load_rules",
    "default_rules",
    "contact_bucket",
    "extract_features",
    "score_types",
    "classify_type",
    "build_taxonomy",
    "taxonomy_path",
    "quantity_label",
    "detect_combinations",
    "combination_name",
    "label_record",
    "partition_held",
]

SHAPE_BASED = "shape-based"
FUNCTION_BASED = "function-based"

ABDUCTION = ("adducted", "partially-abducted", "fully-abducted")
FLEXION = ("small", "large", "resistance-based")
OPPOSITION = ("yes", "no", "irrelevant-observed")
CLOSURE = ("containment", "force-closure")
CONTACT_REGIONS = ("fingertip", "finger-link", "finger-side", "palm")
COLUMNS = ("opposition", "abduction", "flexion", "contact", "closure", "fingers", "tip")

_ALIASES = {
    "opposed": "yes",
    "same-side": "no",
    "neutral": "irrelevant-observed",
    "irrelevant": "irrelevant-observed",
    "loosely-adducted": "adducted",
    "partial": "partially-abducted",
    "fully": "fully-abducted",
    "resistance": "resistance-based",
    "fc": "force-closure",
    "force-closed": "force-closure",
    "contained": "containment",
    "finger": "finger-link",
}


class MOGType(enum.Enum):
    Cylindrical = "Cylindrical"
    Funnel = "Funnel"
    Cup = "Cup"
    Tracks = "Tracks"
    InverseBasket = "InverseBasket"
    Max = "Max"
    AbductionClip = "AbductionClip"
    FingerPalmClip = "FingerPalmClip"
    FingerFingerClip = "FingerFingerClip"
    FingertipFingertipPinch = "FingertipFingertipPinch"
    FingertipFingerPinch = "FingertipFingerPinch"
    MultiFingerPinch = "MultiFingerPinch"

    @property
    def group(self):
        return SHAPE_BASED if _ORDER[self] < 6 else FUNCTION_BASED

    @property
    def label(self):
        return _LABELS[self]

    @property
    def plural(self):
        word = _LABELS[self]
        if self.group == SHAPE_BASED:
            return word.lower() + " grasps"
        return word.lower() + ("es" if word.endswith("ch") else "s")


_ORDER = {t: i for i, t in enumerate(MOGType)}
_LABELS = {
    MOGType.Cylindrical: "Cylindrical",
    MOGType.Funnel: "Funnel",
    MOGType.Cup: "Cup",
    MOGType.Tracks: "Tracks",
    MOGType.InverseBasket: "Inverse basket",
    MOGType.Max: "Max",
    MOGType.AbductionClip: "Abduction clip",
    MOGType.FingerPalmClip: "Finger-palm clip",
    MOGType.FingerFingerClip: "Finger-finger clip",
    MOGType.FingertipFingertipPinch: "Fingertip-fingertip pinch",
    MOGType.FingertipFingerPinch: "Fingertip-finger pinch",
    MOGType.MultiFingerPinch: "Multi-finger pinch",
}
# Leaf placement under the function-based branch.
_FUNCTION_PATHS = {
    MOGType.AbductionClip: ("clip", "non-palm", "abduction"),
    MOGType.FingerPalmClip: ("clip", "palm"),
    MOGType.FingerFingerClip: ("clip", "non-palm", "finger-finger"),
    MOGType.FingertipFingertipPinch: ("pinch", "fingertip-fingertip"),
    MOGType.FingertipFingerPinch: ("pinch", "fingertip-finger"),
    MOGType.MultiFingerPinch: ("pinch", "multi-finger"),
}
_SHAPE_LEAVES = {
    MOGType.Cylindrical: "cylindrical",
    MOGType.Funnel: "funnel",
    MOGType.Cup: "cup",
    MOGType.Tracks: "tracks",
    MOGType.InverseBasket: "inverse-basket",
    MOGType.Max: "max",
}


class NoGraspError(ValueError):
    """The record holds no objects, so there is nothing to classify."""


def _norm(value):
    v = str(value).strip().lower().replace("_", "-").replace(" ", "-")
    return _ALIASES.get(v, v)


@dataclass(frozen=True)
class Rule:
    """One row of the rule table.  ``barrett`` is False for types only seen with a human hand."""

    type: MOGType
    opposition: str
    abduction: str
    flexion: str
    contact: str
    closure: str
    fingers: str = "*"
    tip: str = "*"
    manipulability: str = "hard"
    barrett: bool = True

    @property
    def group(self):
        return self.type.group


_ROW_KEYS = ("type", "group", "opposition", "abduction", "flexion", "contact", "manipulability", "closure", "fingers", "tip", "barrett")


def load_rules(source=None):
    """Parse a rule table.

    ``source`` is a path, a file object, or ``None`` for the bundled table.
    Lines starting with ``#`` are comments.  Rows must name each grasp type
    exactly once.
    """
    if source is None:
        text = resources.files("mogsim").joinpath("data/mog_rules.csv").read_text(encoding="utf-8")
    elif hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    missing = set(_ROW_KEYS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"rule table lacks columns: {sorted(missing)}")
    rules = []
    for row in reader:
        row = {k: v.strip() for k, v in row.items()}
        t = MOGType(row["type"])
        if row["group"] != t.group:
            raise ValueError(f"{t.value}: group {row['group']!r} != {t.group!r}")
        rules.append(Rule(
            t,
            row["opposition"],
            row["abduction"],
            row["flexion"],
            row["contact"],
            row["closure"],
            row["fingers"],
            row["tip"],
            row["manipulability"],
            row["barrett"].lower() in ("yes", "true", "1"),
        ))
    seen = Counter(r.type for r in rules)
    if set(seen) != set(MOGType) or max(seen.values()) > 1:
        raise ValueError("rule table must list each of the 12 grasp types exactly once")
    return tuple(rules)


_DEFAULT_RULES = None


def default_rules():
    global _DEFAULT_RULES
    if _DEFAULT_RULES is None:
        _DEFAULT_RULES = load_rules()
    return _DEFAULT_RULES


@dataclass(frozen=True)
class Bucketing:
    """Thresholds that turn joint angles into categories (degrees)."""

    adducted_below: float = 20.0
    fully_above: float = 150.0
    loose_adducted_below: float = 40.0
    large_flexion_from: float = 60.0
    resistance_fingers: int = 2
    opposition_band: float = 45.0

    def __post_init__(self):
        if not 0 <= self.adducted_below <= self.loose_adducted_below <= self.fully_above <= 180:
            raise ValueError("spread thresholds must satisfy 0 <= adducted <= loose <= fully <= 180")
        if self.resistance_fingers < 1:
            raise ValueError("resistance_fingers must be at least 1")

    def abduction(self, spread):
        if spread < self.adducted_below:
            return "adducted"
        if spread > self.fully_above:
            return "fully-abducted"
        return "partially-abducted"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def contact_bucket(regions):
    """Collapse a set of hand regions into one contact-location category."""
    s = set(regions)
    fingers = s - {"palm"}
    if "palm" in s:
        return "finger-and-palm" if fingers else "palm"
    if not fingers:
        return "none"
    if fingers == {"finger-side"}:
        return "finger-side"
    if fingers == {"fingertip"}:
        return "fingertip"
    return "finger"


@dataclass(frozen=True)
class FeatureVector:
    """Categorical description of a grasp.

    ``fingers`` (the involved-finger subset) and ``spread`` are optional; when
    ``fingers`` is ``None`` the finger-count and fingertip columns are skipped.
    """

    opposition: str
    abduction: str
    flexion: str
    contacts: frozenset
    closure: str
    fingers: frozenset | None = None
    spread: float | None = None

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "opposition", _norm(self.opposition))
        set_(self, "abduction", _norm(self.abduction))
        set_(self, "flexion", _norm(self.flexion))
        set_(self, "closure", _norm(self.closure))
        set_(self, "contacts", frozenset(_norm(c) for c in self.contacts))
        if self.fingers is not None:
            set_(self, "fingers", frozenset(int(f) for f in self.fingers))
        for name, allowed in (("opposition", OPPOSITION), ("abduction", ABDUCTION), ("flexion", FLEXION), ("closure", CLOSURE)):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        bad = self.contacts - set(CONTACT_REGIONS)
        if bad:
            raise ValueError(f"unknown contact regions {sorted(bad)}")

    @property
    def contact(self):
        return contact_bucket(self.contacts)

    @property
    def tip(self):
        return "tip" if "fingertip" in self.contacts else "no-tip"

    def to_dict(self):
        return {
            "opposition": self.opposition,
            "abduction": self.abduction,
            "flexion": self.flexion,
            "contacts": sorted(self.contacts),
            "contact": self.contact,
            "closure": self.closure,
            "fingers": None if self.fingers is None else sorted(self.fingers),
            "spread": self.spread,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["opposition"], d["abduction"], d["flexion"], frozenset(d["contacts"]), d["closure"],
                   None if d.get("fingers") is None else frozenset(d["fingers"]), d.get("spread"))


def _fingers_match(entry, n, total):
    if entry == "*":
        return True
    if entry == "all":
        return n == total
    if entry.startswith(">="):
        return n >= int(entry[2:])
    return n == int(entry)


def _rule_score(rule, f, bucketing, n_fingers):
    score = 0
    score += rule.opposition in ("*", f.opposition)
    if rule.abduction == "loosely-adducted":
        loose = f.spread is not None and f.spread < bucketing.loose_adducted_below
        score += f.abduction == "adducted" or loose
    else:
        score += rule.abduction in ("*", f.abduction)
    score += rule.flexion in ("*", f.flexion)
    score += rule.contact in ("*", f.contact)
    score += rule.closure in ("*", f.closure)
    if f.fingers is not None:
        score += _fingers_match(rule.fingers, len(f.fingers), n_fingers)
        score += rule.tip in ("*", f.tip)
    return int(score)


def score_types(features, rules=None, bucketing=Bucketing(), n_fingers=3):
    """Score of every type, as a dict in table order."""
    rules = default_rules() if rules is None else rules
    return {r.type: _rule_score(r, features, bucketing, n_fingers) for r in rules}


def classify_type(features, rules=None, bucketing=Bucketing(), n_fingers=3):
    """All types sharing the maximal score, in table order."""
    scores = score_types(features, rules, bucketing, n_fingers)
    best = max(scores.values())
    return [t for t, s in scores.items() if s == best]


# -- feature extraction -------------------------------------------------------

def _get(record, name, default=None):
    if isinstance(record, dict):
        return record.get(name, default)
    return getattr(record, name, default)


def _held_contacts(record, objects):
    keys = {str(o) for o in objects}
    out = []
    for c in _get(record, "contacts", []) or []:
        if not isinstance(c, dict):
            c = c.to_dict()
        if c.get("region", "object") == "object" or c.get("body_b") == "container":
            continue
        if str(c["body_a"]) in keys:
            out.append(c)
    return out


def extract_features(record, bucketing=Bucketing(), objects=None):
    """Feature vector of a record, or of the subset ``objects`` of its held objects."""
    held = list(_get(record, "held", []) or [])
    if not held:
        raise NoGraspError("record holds no objects")
    objects = held if objects is None else list(objects)
    contacts = _held_contacts(record, objects)
    if not contacts:
        raise NoGraspError("held objects have no hand contacts")
    regions = {c["region"] for c in contacts}
    fingers = {int(c["finger"]) for c in contacts if c.get("finger") is not None}
    fc = _get(record, "final_config") or {}
    spread = float(fc.get("spread", 0.0))
    base = [float(b) for b in fc.get("base", [0.0, 0.0, 0.0])]
    # A finger ended on resistance if it latched or its base joint froze on torque.
    stopped = _get(record, "torque_stopped") or []
    frozen = _get(record, "torque_frozen") or []
    ended = [bool(a) or bool(b) for a, b in zip_longest(stopped, frozen)]
    if sum(ended) >= bucketing.resistance_fingers:
        flexion = "resistance-based"
    else:
        flexion = "large" if float(np.mean(base)) >= bucketing.large_flexion_from else "small"
    holds = _get(record, "holds") or {}
    tags = [(holds.get(str(o)) or holds.get(o) or {}).get("tag") for o in objects]
    closure = "force-closure" if "force-closed" in tags else "containment"
    opp = opposition_class(HandConfiguration(spread, tuple(base)), bucketing.opposition_band)
    return FeatureVector(opp, bucketing.abduction(spread), flexion, frozenset(regions), closure,
                         frozenset(fingers), spread)


# -- taxonomy ----------------------------------------------------------------

@dataclass
class TaxonomyNode:
    name: str
    path: str
    children: list = field(default_factory=list)
    type: MOGType | None = None

    def child(self, name):
        for c in self.children:
            if c.name == name:
                return c
        raise KeyError(name)

    def leaves(self):
        if not self.children:
            return [self]
        return [leaf for c in self.children for leaf in c.leaves()]

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def to_dict(self):
        d = {"name": self.name, "path": self.path}
        if self.type is not None:
            d["type"] = self.type.value
        if self.children:
            d["children"] = [c.to_dict() for c in self.children]
        return d

    def render(self, indent=0):
        tag = f"  [{self.type.value}]" if self.type is not None else ""
        lines = ["  " * indent + self.name + tag]
        for c in self.children:
            lines.append(c.render(indent + 1))
        return "\n".join(lines)


def _segments(t, quantity=None):
    if t.group == SHAPE_BASED:
        mid = (quantity,) if quantity else ()
        return (SHAPE_BASED,) + mid + (_SHAPE_LEAVES[t],)
    return (FUNCTION_BASED,) + _FUNCTION_PATHS[t]


def taxonomy_path(t, quantity=None):
    """Slash-delimited path from the root to the leaf of ``t``.

    ``quantity`` optionally inserts an object-quantity level under the
    shape-based branch (for instance ``quantity_label(held_count)``).
    """
    return "/".join(_segments(MOGType(t), quantity))


def build_taxonomy(quantity=None):
    """The type tree; the root node is named ``mog`` and has an empty path."""
    root = TaxonomyNode("mog", "")
    for t in MOGType:
        node = root
        for seg in _segments(t, quantity):
            try:
                node = node.child(seg)
            except KeyError:
                new = TaxonomyNode(seg, f"{node.path}/{seg}".lstrip("/"))
                node.children.append(new)
                node = new
        node.type = t
    return root


def quantity_label(count, bounds=(2, 4)):
    """Coarse object-quantity bucket: 'single', 'pair', 'few' or 'many'."""
    lo, hi = bounds
    if count < lo:
        return "single"
    if count == lo:
        return "pair"
    return "few" if count <= hi else "many"


# -- combinations --------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    """A group of held objects classified on its own."""

    objects: tuple
    types: tuple
    score: int
    features: FeatureVector

    @property
    def type(self):
        return self.types[0]

    def to_dict(self):
        return {
            "objects": list(self.objects),
            "type": self.type.value,
            "alternatives": [t.value for t in self.types[1:]],
            "score": self.score,
            "features": self.features.to_dict(),
        }


class _Union:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def join(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb, key=str)] = min(ra, rb, key=str)


def partition_held(record):
    """Group held objects into independently held cells.

    Objects with the same supporting finger subset (palm included) share a
    cell.  An object that is not force-closed joins every held neighbor it
    rests on, and so does an object with no hand contact of its own.
    """
    held = [str(o) for o in _get(record, "held", []) or []]
    if not held:
        return []
    key_of = {str(o): o for o in _get(record, "held", [])}
    uf = _Union(held)
    signature = {o: set() for o in held}
    for c in _held_contacts(record, held):
        signature[str(c["body_a"])].add("palm" if c["region"] == "palm" else int(c["finger"]))
    by_sig = {}
    for o in held:
        if signature[o]:
            by_sig.setdefault(frozenset(signature[o]), []).append(o)
    for group in by_sig.values():
        for o in group[1:]:
            uf.join(group[0], o)
    holds = _get(record, "holds") or {}
    touching = {o: set() for o in held}
    for c in _get(record, "contacts", []) or []:
        if not isinstance(c, dict):
            c = c.to_dict()
        if c.get("region", "object") != "object":
            continue
        a, b = str(c["body_a"]), str(c["body_b"])
        if a in touching and b in touching:
            touching[a].add(b)
            touching[b].add(a)
    for o in held:
        h = holds.get(o) or holds.get(key_of[o]) or {}
        if h.get("tag") == "force-closed" and signature[o]:
            continue
        neighbors = {str(s) for s in h.get("supporting", [])} & set(held)
        if not signature[o]:
            neighbors |= touching[o]
        for n in neighbors:
            uf.join(o, n)
    cells = {}
    for o in held:
        cells.setdefault(uf.find(o), []).append(key_of[o])
    return sorted(cells.values(), key=lambda objs: held.index(str(objs[0])))


def detect_combinations(record, rules=None, bucketing=Bucketing(), n_fingers=3):
    """Classify each cell of :func:`partition_held`; returns a list of ``Cell``."""
    out = []
    for objs in partition_held(record):
        f = extract_features(record, bucketing, objs)
        scores = score_types(f, rules, bucketing, n_fingers)
        best = max(scores.values())
        types = tuple(t for t, s in scores.items() if s == best)
        out.append(Cell(tuple(objs), types, best, f))
    return out


def combination_name(types):
    """Readable name of a multiset of types, e.g. 'Multiple finger-palm clips'."""
    counts = Counter(MOGType(t) for t in types)
    if not counts:
        return ""
    ordered = sorted(counts, key=_ORDER.get)
    if len(ordered) == 1:
        t = ordered[0]
        return t.label if counts[t] == 1 else f"Multiple {t.plural}"
    parts = []
    for t in ordered:
        word = t.label if counts[t] == 1 else f"multiple {t.plural}"
        parts.append(word if not parts else word[0].lower() + word[1:])
    return " & ".join(parts)


def label_record(record, rules=None, bucketing=Bucketing(), n_fingers=3, quantity_bounds=None):
    """The ``labels`` block for a record.

    Records with no held object get ``{"no_grasp": True, "types": []}``
    plus the configuration echo.  ``quantity_bounds`` enables the quantity
    level of shape-based taxonomy paths.
    """
    rules = default_rules() if rules is None else rules
    by_type = {r.type: r for r in rules}
    echo = {"bucketing": bucketing.to_dict()}
    held = list(_get(record, "held", []) or [])
    try:
        f = extract_features(record, bucketing)
    except NoGraspError:
        return {"no_grasp": True, "types": [], "held_count": len(held), **echo}
    scores = score_types(f, rules, bucketing, n_fingers)
    best = max(scores.values())
    types = [t for t, s in scores.items() if s == best]
    quantity = quantity_label(len(held), quantity_bounds) if quantity_bounds else None
    cells = detect_combinations(record, rules, bucketing, n_fingers)
    return {
        "no_grasp": False,
        "types": [t.value for t in types],
        "score": best,
        "max_score": len(COLUMNS) if f.fingers is not None else len(COLUMNS) - 2,
        "scores": {t.value: s for t, s in scores.items()},
        "groups": {t.value: t.group for t in types},
        "taxonomy": {t.value: taxonomy_path(t, quantity) for t in types},
        "manipulability": {t.value: by_type[t].manipulability for t in types},
        "human_hand_type": [t.value for t in types if not by_type[t].barrett],
        "held_count": len(held),
        "features": f.to_dict(),
        "combinations": [c.to_dict() for c in cells],
        "combination": combination_name(c.type for c in cells),
        **echo,
    }
