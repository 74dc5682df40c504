import json

import pytest

from mogsim.records import (
    SCHEMA,
    GraspRecord,
    RecordValidationError,
    load_record,
    record_from_json,
    record_to_json,
    save_record,
    validate_record,
)


def sample_record():
    return GraspRecord(
        seed=11,
        master_seed=3,
        trial_index=2,
        shape="sphere:large",
        final_config={"spread": 45.0, "base": [30.0, 33.0, 27.0], "coupled": [10.0, 11.0, 9.0]},
        steps=40,
        torque_stopped=[True, False, True],
        contacts=[{"body_a": 0, "body_b": "f1.distal", "point": [1.0, 2.0, 3.0], "normal": [0.0, 0.0, 1.0],
                   "depth": 0.2, "region": "fingertip", "finger": 1, "segment": "distal", "arms": [5.0, 2.0],
                   "taxel": ["f1", 1, 7]}],
        holds={"0": {"tag": "supported", "supporting": ["f1.distal"], "degenerate": False},
               "1": {"tag": "free", "supporting": [], "degenerate": False}},
        held=[0],
        held_count=1,
        taxels=[0.0] * 96,
    )


def test_round_trip_equal():
    rec = sample_record()
    back = record_from_json(record_to_json(rec))
    assert back == rec
    assert not back.success


def test_serialization_byte_identical(tmp_path):
    rec = sample_record()
    save_record(rec, tmp_path / "a.json")
    again = load_record(tmp_path / "a.json")
    save_record(again, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    d = json.loads((tmp_path / "a.json").read_text())
    assert d["schema"] == SCHEMA and d["success"] is False


def test_success_flag_follows_count():
    rec = GraspRecord(held=[0, 1], held_count=2)
    assert rec.success and rec.to_dict()["success"]


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d.update(final_config={"spread": 0.0, "base": [1.0, 2.0]}), "final_config"),
    (lambda d: d["contacts"][0].pop("normal"), "contacts[0].normal"),
    (lambda d: d["contacts"][0].update(depth=-1.0), "contacts[0].depth"),
    (lambda d: d["contacts"][0].update(region="elbow"), "contacts[0].region"),
    (lambda d: d["holds"]["0"].update(tag="grabbed"), "holds.0"),
    (lambda d: d.update(held_count=5), "held_count"),
    (lambda d: d.update(success=True), "success"),
    (lambda d: d.update(taxels=[0.0] * 3), "taxels"),
    (lambda d: d.update(version=99), "version"),
    (lambda d: d.update(schema="other"), "schema"),
])
def test_validation_names_offending_field(mutate, field):
    d = sample_record().to_dict()
    mutate(d)
    with pytest.raises(RecordValidationError) as err:
        validate_record(d)
    assert field in err.value.fields


def test_invalid_json_and_root():
    with pytest.raises(RecordValidationError):
        record_from_json("{not json")
    with pytest.raises(RecordValidationError):
        record_from_json("[1, 2]")


def test_nan_refused():
    rec = sample_record()
    rec.final_config["spread"] = float("nan")
    with pytest.raises(ValueError):
        record_to_json(rec)
