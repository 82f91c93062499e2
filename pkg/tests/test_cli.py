import json
import subprocess
import sys

import pytest

from relact import dataset as ds
from relact import kinematics as kin
from relact.actions import GripperState
from relact.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def demo(tmp_path, capsys):
    path = tmp_path / "ref.jsonl"
    assert run(capsys, "gen-ref", "--seed", "3", "--num-points", "60", "--out", str(path))[0] == 0
    return path


def test_gen_ref_deterministic(tmp_path, capsys, demo):
    other = tmp_path / "again.jsonl"
    run(capsys, "gen-ref", "--seed", "3", "--num-points", "60", "--out", str(other))
    assert other.read_bytes() == demo.read_bytes()


def test_gen_ref_output_validates(capsys, demo):
    code, out, _ = run(capsys, "validate", "--in", str(demo))
    assert code == 0 and "no findings" in out


def test_gen_ref_bad_scale(tmp_path, capsys):
    code, _, err = run(capsys, "gen-ref", "--seed", "1", "--scale", "0", "--out", str(tmp_path / "x.jsonl"))
    assert code == 2 and err.startswith("InvalidParameter")


def test_seed_is_required(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["gen-ref", "--out", str(tmp_path / "x.jsonl")])
    assert info.value.code == 2


def test_validate_findings_exit_one(tmp_path, capsys, demo):
    rec = ds.load_demo(demo)
    left, right = rec.steps[4].command
    steps = list(rec.steps)
    steps[4] = ds.DemoStep(rec.steps[4].proprioception, (GripperState(left.pose, 10.0), right))
    bad = tmp_path / "bad.jsonl"
    ds.save_demo(ds.DemonstrationRecord(rec.task_name, rec.dt, steps, rec.metadata), bad)
    code, out, _ = run(capsys, "validate", "--in", str(bad))
    assert code == 1 and "step 4" in out and "jaw-limit" in out


def test_validate_truncated_exit_two(tmp_path, capsys, demo):
    lines = demo.read_text().splitlines()
    cut = tmp_path / "cut.jsonl"
    cut.write_text("\n".join(lines[:20]) + "\n")
    code, _, err = run(capsys, "validate", "--in", str(cut))
    assert code == 2 and err.startswith("MalformedRecord") and "step 19" in err


def test_validate_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "validate", "--in", str(tmp_path / "nope.jsonl"))
    assert code == 2 and err.startswith("FileNotFoundError")


def test_convert_verify_and_stats(tmp_path, capsys, demo):
    chunks = tmp_path / "c.jsonl"
    code, out, _ = run(
        capsys, "convert", "--in", str(demo), "--kind", "hybrid", "--chunk-size", "20", "--out", str(chunks), "--verify"
    )
    assert code == 0
    err = float(out.strip().splitlines()[-1].split(":")[1])
    assert err < 1e-9
    stats = tmp_path / "s.json"
    assert run(capsys, "stats", "--in", str(chunks), "--out", str(stats))[0] == 0
    doc = json.loads(stats.read_text())
    assert doc["kind"] == "hybrid" and doc["num_samples"] == 41 * 20


def test_convert_too_short(tmp_path, capsys, demo):
    code, _, err = run(capsys, "convert", "--in", str(demo), "--kind", "tool", "--out", str(tmp_path / "c.jsonl"))
    assert code == 2 and err.startswith("RecordTooShort")


def test_stats_empty_chunk_file(tmp_path, capsys):
    empty = tmp_path / "c.jsonl"
    empty.write_text(json.dumps({"schema": "relact-chunks/1", "kind": "tool", "chunk_size": 0, "num_chunks": 0}) + "\n")
    code, _, err = run(capsys, "stats", "--in", str(empty), "--out", str(tmp_path / "s.json"))
    assert code == 2 and err.startswith("EmptyInput")


def test_replay_outputs_and_determinism(tmp_path, capsys):
    args = ["replay", "--seed", "2", "--num-points", "40", "--chunk-size", "15"]
    code, out, _ = run(capsys, *args, "--out", str(tmp_path / "a"))
    assert code == 0 and "Camera-centric" in out and "EvalConfig2" in out
    run(capsys, *args, "--out", str(tmp_path / "b"))
    for name in ("report.json", "rmse_table.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_replay_single_kind_from_reference_file(tmp_path, capsys, demo):
    code, out, _ = run(capsys, "replay", "--seed", "3", "--kind", "tool", "--ref", str(demo), "--out", str(tmp_path / "r"))
    assert code == 0
    doc = json.loads((tmp_path / "r" / "report.json").read_text())
    assert doc["kinds"] == ["tool"] and len(doc["reference_path"]) == 60


def test_replay_quiet_chain_is_exact(tmp_path, capsys):
    chain = tmp_path / "quiet.json"
    kin.save_chain(kin.default_chain().without_noise(), chain)
    code, out, _ = run(
        capsys, "replay", "--chain", str(chain), "--seed", "0", "--num-points", "40", "--out", str(tmp_path / "q")
    )
    assert code == 0
    values = [float(v) for line in out.splitlines()[2:] for v in line.split()[1:]]
    assert len(values) == 9 and max(values) < 1e-6


def test_bad_chain_file(tmp_path, capsys):
    chain = tmp_path / "c.json"
    chain.write_text("{}")
    code, _, err = run(capsys, "replay", "--chain", str(chain), "--seed", "0", "--out", str(tmp_path / "o"))
    assert code == 2 and err.startswith("ChainFormatError")


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "relact.cli", "gen-ref", "--seed", "1", "--scale", "-3", "--out", str(tmp_path / "x")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 2 and "InvalidParameter" in proc.stderr
