import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relact import dataset as ds
from relact import se3
from relact.actions import GripperState, Proprioception, RepresentationKind as K
from relact.errors import (
    EmptyInput,
    InvalidParameter,
    MalformedRecord,
    RecordTooShort,
    SchemaVersionMismatch,
)
from relact.se3 import Pose


def bitwise_equal(a: ds.DemonstrationRecord, b: ds.DemonstrationRecord) -> bool:
    if (a.task_name, a.dt, a.metadata, a.schema_version, len(a)) != (b.task_name, b.dt, b.metadata, b.schema_version, len(b)):
        return False
    for sa, sb in zip(a.steps, b.steps):
        pairs = [
            (sa.proprioception.left, sb.proprioception.left),
            (sa.proprioception.right, sb.proprioception.right),
            (sa.command[0], sb.command[0]),
            (sa.command[1], sb.command[1]),
        ]
        if sa.proprioception.timestamp != sb.proprioception.timestamp:
            return False
        for ga, gb in pairs:
            if not (ga.pose == gb.pose and ga.jaw == gb.jaw):
                return False
    return True


def replace_step(record, i, *, x=None, a=None):
    steps = list(record.steps)
    s = steps[i]
    steps[i] = ds.DemoStep(x or s.proprioception, a or s.command)
    return ds.DemonstrationRecord(record.task_name, record.dt, steps, record.metadata)


# -- save / load ---------------------------------------------------------------

def test_single_step_round_trip(tmp_path):
    rec = ds.synthetic_demo(1, 0)
    rec = ds.DemonstrationRecord(rec.task_name, rec.dt, rec.steps, {})
    ds.save_demo(rec, tmp_path / "d.jsonl")
    assert bitwise_equal(ds.load_demo(tmp_path / "d.jsonl"), rec)


def test_long_record_round_trip_and_metadata(tmp_path):
    rec = ds.synthetic_demo(1000, 7)
    rec = ds.DemonstrationRecord(rec.task_name, rec.dt, rec.steps, {"seed": 7, "camera": {"file": "a.mp4"}, "x": [1, 2]})
    ds.save_demo(rec, tmp_path / "d.jsonl")
    back = ds.load_demo(tmp_path / "d.jsonl")
    assert bitwise_equal(back, rec)
    assert back.metadata["camera"] == {"file": "a.mp4"}


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=3, max_size=3))
def test_arbitrary_floats_round_trip(tmp_path_factory, p):
    g = GripperState(Pose.raw(p, np.eye(3)), 0.5)
    rec = ds.DemonstrationRecord("t", 0.1, [ds.DemoStep(Proprioception(g, g, 0.0), (g, g))])
    path = tmp_path_factory.mktemp("rt") / "d.jsonl"
    ds.save_demo(rec, path)
    assert bitwise_equal(ds.load_demo(path), rec)


def test_save_empty_record(tmp_path):
    with pytest.raises(EmptyInput):
        ds.save_demo(ds.DemonstrationRecord("t", 0.1, []), tmp_path / "d.jsonl")


def corrupt(tmp_path, edit):
    rec = ds.synthetic_demo(10, 1)
    path = tmp_path / "d.jsonl"
    ds.save_demo(rec, path)
    lines = path.read_text().splitlines()
    lines = edit(lines)
    path.write_text("\n".join(lines) + "\n")
    return path


def test_decreasing_timestamp_reports_index(tmp_path):
    def edit(lines):
        obj = json.loads(lines[5])  # step 4
        obj["t"] = 0.01
        lines[5] = json.dumps(obj)
        return lines

    with pytest.raises(MalformedRecord) as info:
        ds.load_demo(corrupt(tmp_path, edit))
    assert info.value.step == 4


def test_truncated_file_reports_index(tmp_path):
    with pytest.raises(MalformedRecord) as info:
        ds.load_demo(corrupt(tmp_path, lambda lines: lines[:7]))
    assert info.value.step == 6
    with pytest.raises(MalformedRecord) as info:
        ds.load_demo(corrupt(tmp_path, lambda lines: lines[:7] + [lines[7][:40]]))
    assert info.value.step == 6


def test_bad_shape_reports_index(tmp_path):
    def edit(lines):
        obj = json.loads(lines[3])
        obj["a"]["left"]["R"] = [[1, 0], [0, 1]]
        lines[3] = json.dumps(obj)
        return lines

    with pytest.raises(MalformedRecord) as info:
        ds.load_demo(corrupt(tmp_path, edit))
    assert info.value.step == 2


def test_header_errors(tmp_path):
    def schema(lines):
        obj = json.loads(lines[0])
        obj["schema"] = "relact-demo/2"
        return [json.dumps(obj)] + lines[1:]

    with pytest.raises(SchemaVersionMismatch):
        ds.load_demo(corrupt(tmp_path, schema))
    with pytest.raises(MalformedRecord) as info:
        ds.load_demo(corrupt(tmp_path, lambda lines: ["{oops"] + lines[1:]))
    assert info.value.step is None
    empty = tmp_path / "e.jsonl"
    empty.write_text("")
    with pytest.raises(MalformedRecord):
        ds.load_demo(empty)


# -- validation ---------------------------------------------------------------

def test_clean_record_has_no_findings():
    assert ds.validate(ds.synthetic_demo(200, 3)) == []


def test_reflection_cited_at_step():
    rec = ds.synthetic_demo(20, 3)
    bad = GripperState(Pose.raw(np.zeros(3), np.diag([1.0, 1.0, -1.0])), 0.5)
    rec = replace_step(rec, 12, a=(bad, rec.steps[12].command[1]))
    findings = ds.validate(rec)
    assert [(f.step, f.code) for f in findings] == [(12, "reflection")]
    assert "step 12" in str(findings[0])


def test_drifted_rotation_finding():
    rec = ds.synthetic_demo(5, 3)
    x = rec.steps[2].proprioception
    drift = GripperState(Pose.raw(x.left.pose.p, x.left.pose.R * 1.001), x.left.jaw)
    rec = replace_step(rec, 2, x=Proprioception(drift, x.right, x.timestamp))
    assert [(f.step, f.code) for f in ds.validate(rec)] == [(2, "rotation")]


def test_jaw_limit_finding():
    rec = ds.synthetic_demo(5, 3)
    left, right = rec.steps[1].command
    rec = replace_step(rec, 1, a=(GripperState(left.pose, 10.0), right))
    assert [(f.step, f.code) for f in ds.validate(rec)] == [(1, "jaw-limit")]


def test_timestamp_findings():
    rec = ds.synthetic_demo(5, 3)
    x = rec.steps[3].proprioception
    rec = replace_step(rec, 3, x=Proprioception(x.left, x.right, 0.0))
    assert [(f.step, f.code) for f in ds.validate(rec)] == [(3, "timestamp")]
    x0 = rec.steps[0].proprioception
    rec = replace_step(rec, 0, x=Proprioception(x0.left, x0.right, -1.0))
    assert (0, "timestamp") in [(f.step, f.code) for f in ds.validate(rec)]


def test_record_level_findings():
    rec = ds.DemonstrationRecord("t", -0.1, [], schema_version="other/1")
    assert {f.code for f in ds.validate(rec)} == {"schema", "dt", "empty"}


def test_non_finite_finding():
    rec = ds.synthetic_demo(3, 3)
    left, right = rec.steps[0].command
    rec = replace_step(rec, 0, a=(left, GripperState(right.pose, math.nan)))
    assert [(f.step, f.code) for f in ds.validate(rec)] == [(0, "non-finite")]


# -- chunk export -----------------------------------------------------------

def test_chunk_counts():
    rec = ds.synthetic_demo(12, 0)
    assert len(ds.export_chunks(rec, K.TOOL_CENTRIC, 12)) == 1
    chunks = ds.export_chunks(rec, K.TOOL_CENTRIC, 10)
    assert [c.start for c in chunks] == [0, 1, 2]
    assert all(c.target.shape == (10, 20) for c in chunks)
    with pytest.raises(RecordTooShort):
        ds.export_chunks(rec, K.TOOL_CENTRIC, 13)
    with pytest.raises(InvalidParameter):
        ds.export_chunks(rec, K.TOOL_CENTRIC, 0)


@pytest.mark.parametrize("kind", list(K))
def test_chunk_decode_round_trip(kind):
    rec = ds.synthetic_demo(40, 2)
    chunks = ds.export_chunks(rec, kind, 8)
    assert ds.max_roundtrip_error(rec, chunks, kind) < 1e-9


def test_chunk_inputs_are_start_proprioception():
    rec = ds.synthetic_demo(15, 2)
    for c in ds.export_chunks(rec, K.HYBRID_RELATIVE, 5):
        assert c.input is rec.steps[c.start].proprioception


def test_chunk_file_round_trip(tmp_path):
    rec = ds.synthetic_demo(30, 2)
    chunks = ds.export_chunks(rec, K.HYBRID_RELATIVE, 10)
    ds.save_chunks(chunks, K.HYBRID_RELATIVE, tmp_path / "c.jsonl")
    kind, back = ds.load_chunks(tmp_path / "c.jsonl")
    assert kind is K.HYBRID_RELATIVE
    assert [c.start for c in back] == [c.start for c in chunks]
    assert all(np.array_equal(a.target, b.target) for a, b in zip(back, chunks))
    assert ds.max_roundtrip_error(rec, back, kind) < 1e-9


# -- normalization ----------------------------------------------------------

def chunk_of(rows):
    x = ds.synthetic_demo(1, 0).steps[0].proprioception
    return ds.ExportedChunk(0, x, np.asarray(rows, dtype=float))


def test_stats_constant_data():
    stats = ds.compute_stats([chunk_of(np.full((4, 20), 3.5))], K.CAMERA_CENTRIC)
    assert np.array_equal(stats.mean, np.full(20, 3.5))
    assert np.array_equal(stats.std, np.full(20, 1e-6))


def test_stats_population_convention():
    stats = ds.compute_stats([chunk_of(np.zeros((1, 20))), chunk_of(np.full((1, 20), 2.0))], K.TOOL_CENTRIC)
    assert np.array_equal(stats.mean, np.ones(20))
    assert np.array_equal(stats.std, np.ones(20))
    assert stats.num_samples == 2


def test_stats_empty():
    with pytest.raises(EmptyInput):
        ds.compute_stats([], K.TOOL_CENTRIC)


def test_normalize_denormalize_identity():
    rng = np.random.default_rng(0)
    chunks = [chunk_of(rng.normal(3.0, 2.0, (10, 20))) for _ in range(5)]
    stats = ds.compute_stats(chunks, K.HYBRID_RELATIVE)
    v = rng.normal(0.0, 50.0, (1000, 20))
    assert np.allclose(stats.denormalize(stats.normalize(v)), v, rtol=0, atol=1e-9)


def test_stats_order_independent():
    rng = np.random.default_rng(1)
    chunks = [chunk_of(rng.normal(0.0, 10.0, (7, 20))) for _ in range(30)]
    a = ds.compute_stats(chunks, K.TOOL_CENTRIC)
    b = ds.compute_stats(chunks[::-1], K.TOOL_CENTRIC)
    assert np.allclose(a.mean, b.mean, rtol=0, atol=1e-12)
    assert np.allclose(a.std, b.std, rtol=0, atol=1e-12)


def test_stats_file_round_trip(tmp_path):
    stats = ds.compute_stats([chunk_of(np.arange(40.0).reshape(2, 20))], K.TOOL_CENTRIC)
    ds.save_stats(stats, tmp_path / "s.json")
    back = ds.load_stats(tmp_path / "s.json")
    assert back.kind is K.TOOL_CENTRIC and back.num_samples == 2
    assert np.array_equal(back.mean, stats.mean) and np.array_equal(back.std, stats.std)
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["schema"] == "relact-stats/1" and doc["dims"] == 20


def test_stats_shape_checked():
    with pytest.raises(InvalidParameter):
        ds.NormalizationStats(K.TOOL_CENTRIC, np.zeros(19), np.ones(19), 1)
    with pytest.raises(InvalidParameter):
        ds.NormalizationStats(K.TOOL_CENTRIC, np.zeros(20), np.zeros(20), 1)


def test_record_from_reference_pairs_steps():
    from relact import kinematics as kin
    from relact import replay as rp

    ref = rp.record_reference(kin.configure(kin.default_chain(), 0), rp.generate_lemniscate(num_points=20))
    rec = ds.record_from_reference(ref, metadata={"seed": 0})
    assert len(rec) == 20 and rec.dt == ref.dt
    assert rec.steps[3].proprioception is ref.proprioception[3]
    assert ds.validate(rec) == []
    assert se3.orthonormality_error(rec.steps[0].command[0].pose.R) < 1e-12
