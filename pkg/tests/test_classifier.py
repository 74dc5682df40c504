import io

import pytest
from _fixtures import ALTERNATIVES, CANONICAL, COMBINATION_FIXTURES, hand_contact, make_record
from _oracles import RULE_COLUMNS, perturbations
from hypothesis import given
from hypothesis import strategies as st

from mogsim.classifier import (
    FUNCTION_BASED,
    SHAPE_BASED,
    Bucketing,
    FeatureVector,
    MOGType,
    NoGraspError,
    build_taxonomy,
    classify_type,
    combination_name,
    contact_bucket,
    default_rules,
    detect_combinations,
    extract_features,
    label_record,
    load_rules,
    partition_held,
    quantity_label,
    score_types,
    taxonomy_path,
)

RULES = {r.type: r for r in default_rules()}


def vec(opp, abd, flex, contacts, closure, fingers=None, spread=None):
    return FeatureVector(opp, abd, flex, frozenset(contacts), closure,
                         None if fingers is None else frozenset(fingers), spread)


def test_groups_and_order():
    types = list(MOGType)
    assert len(types) == 12
    assert all(t.group == SHAPE_BASED for t in types[:6])
    assert all(t.group == FUNCTION_BASED for t in types[6:])


@pytest.mark.parametrize("features, expected", [
    (("irrelevant", "loosely-adducted", "resistance-based", {"finger", "palm"}, "containment"), "Cylindrical"),
    (("no", "partially-abducted", "large", {"finger"}, "containment"), "Cup"),
    (("yes", "fully-abducted", "resistance-based", {"fingertip"}, "force-closure"), "FingertipFingertipPinch"),
])
def test_table_examples(features, expected):
    assert classify_type(vec(*features)) == [MOGType(expected)]


@pytest.mark.parametrize("name", list(CANONICAL))
def test_canonical_vector_unique(name):
    assert classify_type(vec(*CANONICAL[name])) == [MOGType(name)]


def test_classify_is_pure():
    f = vec(*CANONICAL["Tracks"])
    assert score_types(f) == score_types(f)
    assert list(score_types(f)) == list(MOGType)


def test_wildcard_monotone():
    checked = 0
    for row in CANONICAL.values():
        f = vec(*row)
        base = score_types(f)
        for t, rule in RULES.items():
            for column in RULE_COLUMNS:
                if getattr(rule, column) != "*":
                    continue
                for g in perturbations(f, column):
                    assert score_types(g)[t] >= base[t]
                    checked += 1
    assert checked > 50


@given(st.sampled_from(ALTERNATIVES["opposition"]), st.sampled_from(ALTERNATIVES["abduction"]),
       st.sampled_from(ALTERNATIVES["flexion"]), st.sampled_from(ALTERNATIVES["contacts"]),
       st.sampled_from(ALTERNATIVES["closure"]), st.sampled_from(ALTERNATIVES["fingers"]))
def test_always_some_label(opp, abd, flex, contacts, closure, fingers):
    f = vec(opp, abd, flex, contacts, closure, fingers)
    out = classify_type(f)
    scores = score_types(f)
    assert out and all(scores[t] == max(scores.values()) for t in out)
    assert out == sorted(out, key=list(MOGType).index)


def test_contact_bucket():
    assert contact_bucket({"finger-link", "palm"}) == "finger-and-palm"
    assert contact_bucket({"palm"}) == "palm"
    assert contact_bucket({"fingertip"}) == "fingertip"
    assert contact_bucket({"finger-side"}) == "finger-side"
    assert contact_bucket({"fingertip", "finger-side"}) == "finger"
    assert contact_bucket(set()) == "none"


def test_feature_validation_and_aliases():
    f = vec("opposed", "partial", "resistance", {"finger"}, "fc")
    assert (f.opposition, f.abduction, f.flexion, f.closure) == ("yes", "partially-abducted", "resistance-based",
                                                                 "force-closure")
    assert f.contacts == {"finger-link"}
    assert FeatureVector.from_dict(f.to_dict()) == f
    with pytest.raises(ValueError):
        vec("maybe", "adducted", "small", {"palm"}, "containment")
    with pytest.raises(ValueError):
        vec("yes", "adducted", "small", {"elbow"}, "containment")


def test_bucketing():
    b = Bucketing()
    assert [b.abduction(s) for s in (0, 19.9, 20, 150, 150.1, 180)] == [
        "adducted", "adducted", "partially-abducted", "partially-abducted", "fully-abducted", "fully-abducted"]
    assert Bucketing.from_dict(b.to_dict()) == b
    with pytest.raises(ValueError):
        Bucketing(adducted_below=160.0)


def test_extract_features_example():
    contacts = [hand_contact(0, 1, "fingertip"), hand_contact(0, 2, "finger-link"), hand_contact(0, 0, "palm")]
    rec = make_record(0.0, (40.0, 40.0, 40.0), contacts, {0: ("contained", [])})
    f = extract_features(rec)
    assert (f.opposition, f.abduction, f.flexion, f.closure) == ("yes", "adducted", "resistance-based",
                                                                 "containment")
    assert f.contacts == {"fingertip", "finger-link", "palm"} and f.fingers == {1, 2}


def test_extract_features_buckets():
    contacts = [hand_contact(0, 1, "finger-link"), hand_contact(0, 2, "finger-link")]
    holds = {0: ("force-closed", [])}
    f = extract_features(make_record(180.0, (0.0, 0.0, 0.0), contacts, holds, stopped=(False,) * 3))
    assert f.abduction == "fully-abducted" and f.flexion == "small" and f.closure == "force-closure"
    assert f.opposition == "no"
    f = extract_features(make_record(90.0, (70.0, 70.0, 40.0), contacts, holds, stopped=(True, False, False)))
    assert f.flexion == "large" and f.opposition == "irrelevant-observed"


def test_extract_features_ignores_unheld_and_container():
    contacts = [hand_contact(0, 1, "fingertip"), hand_contact(1, 2, "palm"),
                {**hand_contact(0, 3, "finger-side"), "body_b": "container"}]
    rec = make_record(0.0, (10.0,) * 3, contacts, {0: ("supported", []), 1: ("free", [])})
    assert extract_features(rec).contacts == {"fingertip"}


def test_no_grasp_error():
    with pytest.raises(NoGraspError):
        extract_features(make_record(0.0, (0.0,) * 3, [], {0: ("free", [])}))
    rec = make_record(0.0, (0.0,) * 3, [], {0: ("supported", [])})
    with pytest.raises(NoGraspError):
        extract_features(rec)
    assert label_record(rec)["no_grasp"] and label_record(rec)["types"] == []


def test_taxonomy_paths():
    assert taxonomy_path(MOGType.FingerPalmClip) == "function-based/clip/palm"
    assert taxonomy_path(MOGType.MultiFingerPinch) == "function-based/pinch/multi-finger"
    assert taxonomy_path(MOGType.Cup) == "shape-based/cup"
    assert taxonomy_path("Cup", quantity="few") == "shape-based/few/cup"
    assert taxonomy_path(MOGType.AbductionClip).startswith("function-based/clip/non-palm/")


def test_taxonomy_tree():
    root = build_taxonomy()
    assert [c.name for c in root.children] == [SHAPE_BASED, FUNCTION_BASED]
    fn = root.child(FUNCTION_BASED)
    assert [c.name for c in fn.children] == ["clip", "pinch"]
    assert {c.name for c in fn.child("clip").children} == {"palm", "non-palm"}
    leaves = root.leaves()
    assert sorted(leaf.type.value for leaf in leaves) == sorted(t.value for t in MOGType)
    for leaf in leaves:
        assert leaf.path == taxonomy_path(leaf.type)
    assert "Cylindrical" in root.render() and root.to_dict()["name"] == "mog"


def test_quantity_label():
    assert [quantity_label(n) for n in (1, 2, 3, 4, 5)] == ["single", "pair", "few", "few", "many"]


def test_single_cell_equals_classify():
    contacts = [hand_contact(0, 1, "fingertip"), hand_contact(0, 2, "fingertip")]
    rec = make_record(180.0, (50.0,) * 3, contacts, {0: ("force-closed", [])})
    cells = detect_combinations(rec)
    assert len(cells) == 1 and list(cells[0].types) == classify_type(extract_features(rec))


@pytest.mark.parametrize("name", list(COMBINATION_FIXTURES))
def test_combination_fixtures(name):
    build, expected = COMBINATION_FIXTURES[name]
    rec = build()
    cells = detect_combinations(rec)
    assert sorted(c.type.value for c in cells) == sorted(expected)
    assert all(len(c.types) == 1 for c in cells)
    labels = label_record(rec)
    assert labels["combination"] == name
    # Partition soundness: every held object in exactly one cell.
    objs = [o for cell in partition_held(rec) for o in cell]
    assert sorted(objs) == sorted(rec["held"])


def test_combination_names():
    assert combination_name([]) == ""
    assert combination_name([MOGType.Cup]) == "Cup"
    assert combination_name(["FingerPalmClip"] * 2) == "Multiple finger-palm clips"
    assert combination_name(["Tracks", "Tracks"]) == "Multiple tracks grasps"
    assert combination_name(["FingertipFingertipPinch", "Cylindrical"]) == "Cylindrical & fingertip-fingertip pinch"


def test_label_record_contents():
    rec = COMBINATION_FIXTURES["Tracks & finger-palm clip"][0]()
    labels = label_record(rec, quantity_bounds=(2, 4))
    assert not labels["no_grasp"] and labels["held_count"] == 2
    assert labels["max_score"] == 7 and labels["bucketing"] == Bucketing().to_dict()
    for t in labels["types"]:
        assert labels["taxonomy"][t] == taxonomy_path(t, "pair")


def test_human_hand_annotation():
    contacts = [hand_contact(0, 1, "finger-link"), hand_contact(0, 2, "finger-link"), hand_contact(0, 3, "finger-link"),
                hand_contact(0, 0, "palm")]
    rec = make_record(100.0, (30.0,) * 3, contacts, {0: ("force-closed", [])}, stopped=(False,) * 3)
    labels = label_record(rec)
    assert "InverseBasket" in labels["types"]
    assert "InverseBasket" in labels["human_hand_type"]
    assert set(labels["human_hand_type"]) <= {"InverseBasket", "Max", "FingerFingerClip", "MultiFingerPinch"}


def test_rule_table_audit():
    assert [r.type for r in default_rules()] == list(MOGType)
    assert RULES[MOGType.FingerFingerClip].closure == "force-closure"
    assert not RULES[MOGType.Max].barrett and RULES[MOGType.Cup].barrett


def test_load_rules_errors(tmp_path):
    from importlib import resources
    text = resources.files("mogsim").joinpath("data/mog_rules.csv").read_text(encoding="utf-8")
    assert len(load_rules(io.StringIO(text))) == 12
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    with pytest.raises(ValueError):
        load_rules(io.StringIO("\n".join(rows[:-1])))
    with pytest.raises(ValueError):
        load_rules(io.StringIO("\n".join(rows + [rows[1]])))
    with pytest.raises(ValueError):
        load_rules(io.StringIO(rows[0].replace("barrett", "other") + "\n" + "\n".join(rows[1:])))
    bad = tmp_path / "rules.csv"
    bad.write_text("\n".join([rows[0], rows[1].replace("shape-based", "function-based")] + rows[2:]))
    with pytest.raises(ValueError):
        load_rules(bad)
