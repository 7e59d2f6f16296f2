import json
import subprocess
import sys

import pytest

from hardwall import cli


def run(args, capsys):
    code = cli.main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_lambda_prime(capsys):
    code, out, _ = run(["lambda-prime", "--d", "2", "--n", "16", "--cpp", "1.0"], capsys)
    assert code == 0
    row = json.loads(out)
    assert abs(row["value"] - 4.885) < 0.01 and abs(row["residual"]) <= 1e-9


def test_positivity_with_manifest(tmp_path, capsys):
    out = tmp_path / "pos.jsonl"
    args = ["positivity", "--d", "2", "--n", "2", "--method", "conditional",
            "--samples", "1000000", "--seed", "7", "--shards", "8", "--out", str(out)]
    assert run(args, capsys)[0] == 0
    row = json.loads(out.read_text())
    assert abs(row["value"] - 1 / 9) < 3 * row["stderr"]
    assert (row["seed"], row["shards"], row["d"], row["n"]) == (7, 8, 2, 2)
    assert "wall_clock" not in row
    manifest = json.loads((tmp_path / "pos.jsonl.manifest.json").read_text())
    assert manifest["command_line"][1:] == args
    assert manifest["config"]["samples"] == 1000000 and manifest["seed"] == 7
    assert manifest["started"] and manifest["finished"] and manifest["exit_code"] == 0
    assert manifest["outputs"] == [str(out)]


def test_rerun_from_manifest_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    base = ["cond-mean", "--d", "2", "--n", "5", "--samples", "5000", "--shards", "3"]
    run(base + ["--out", str(a)], capsys)
    manifest = json.loads((tmp_path / "a.jsonl.manifest.json").read_text())
    again = manifest["command_line"][1:]
    again[again.index("--out") + 1] = str(b)
    run(again, capsys)
    assert a.read_bytes() == b.read_bytes()


def test_floats_use_17_significant_digits():
    assert cli.dumps({"x": 0.1, "y": [1, 2.5], "z": None, "ok": True}) == (
        '{"x": 0.10000000000000001, "y": [1, 2.5], "z": null, "ok": true}')
    assert json.loads(cli.dumps({"x": 1 / 3}))["x"] == 1 / 3


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nd = 2\nn = 12\n\nsamples=500  # trailing\n")
    code, out, _ = run(["lemma-sum", "--config", str(cfg), "--n", "14"], capsys)
    assert code == 0 and json.loads(out)["n"] == 14
    assert cli.load_config(str(cfg)) == {"d": 2, "n": 12, "samples": 500}


def test_empty_config_gives_defaults(tmp_path):
    cfg = tmp_path / "empty.cfg"
    cfg.write_text("")
    assert cli.load_config(str(cfg)) == {}
    args = cli.build_parser().parse_args(["positivity", "--config", str(cfg)])
    merged = cli.merge_config(args)
    assert merged["seed"] == cli.DEFAULT_SEED and merged["d"] == 2


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("dd = 2\n")
    code, _, err = run(["lemma-sum", "--config", str(bad)], capsys)
    assert code == 1 and "'dd'" in err and "samples" in err and "thresholds" in err
    bad.write_text("d = 2\nthis line is broken\n")
    code, _, err = run(["lemma-sum", "--config", str(bad)], capsys)
    assert code == 1 and ":2:" in err
    bad.write_text("n = twelve\n")
    code, _, err = run(["lemma-sum", "--config", str(bad)], capsys)
    assert code == 1 and ":1:" in err
    code, _, err = run(["lemma-sum", "--config", str(tmp_path / "missing.cfg")], capsys)
    assert code == 1


@pytest.mark.parametrize("args", [
    ["positivity", "--dd", "2"],
    ["frobnicate"],
    [],
    ["positivity", "--d", "1"],
    ["positivity", "--samples", "0"],
    ["tail", "--d", "2", "--n", "4"],
    ["tail", "--thresholds", "1,x"],
    ["sample", "--model", "comparison"],
    ["cov", "--model", "comparison"],
    ["cov", "--d", "2", "--n", "11"],
    ["lambda-prime", "--d", "2", "--n", "2", "--cpp", "100"],
    ["sample", "--d", "2", "--n", "70"],
])
def test_usage_errors_exit_one(args, capsys):
    code, out, err = run(args, capsys)
    assert code == 1
    assert err.startswith("hardwall: error:") and err.count("\n") == 1


def test_tail_outputs(capsys):
    code, out, _ = run(["tail", "--d", "2", "--n", "6", "--thresholds", "3,4,5",
                        "--samples", "2000", "--format", "csv"], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "threshold,log_estimate" and len(lines) == 4
    code, out, _ = run(["tail", "--d", "2", "--n", "8", "--lambda", "1.0", "--tilt", "0.25",
                        "--samples", "2000"], capsys)
    row = json.loads(out)
    assert row["estimator"] == "tilted" and row["params"]["tilt"] == 0.25
    code, out, _ = run(["tail", "--d", "2", "--n", "8", "--lambda", "1.0", "--samples", "2000",
                        "--format", "csv"], capsys)
    assert out.startswith("threshold,log_estimate\n")


def test_sample_cov_bounds(capsys):
    code, out, _ = run(["sample", "--d", "3", "--n", "3", "--samples", "5", "--shards", "2"], capsys)
    rows = [json.loads(l) for l in out.splitlines()]
    assert code == 0 and len(rows) == 5 and [r["shard"] for r in rows] == [0, 0, 0, 1, 1]
    for model in ("brw", "comparison"):
        code, out, _ = run(["sample", "--model", model, "--n-prime", "2", "--samples", "2"], capsys)
        assert code == 0 and len(out.splitlines()) == 2
    code, out, _ = run(["cov", "--d", "2", "--n", "2", "--model", "brw", "--format", "csv"], capsys)
    assert out.splitlines()[1:] == ["2,1,0,0", "1,2,0,0", "0,0,2,1", "0,0,1,2"]
    code, out, _ = run(["bounds", "--d", "2", "--n", "16", "--lambda-prime", "4.885", "--K3", "2",
                        "--lambda", "2", "--Kp", "1", "--Kpp", "0.5"], capsys)
    pos, tail = [json.loads(l) for l in out.splitlines()]
    assert abs(pos["log_lower"] - -75.148) < 0.01 and abs(tail["lower"] - 0.1973) < 1e-4


def test_validate_quick_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    code_a, table, _ = run(["validate", "--quick", "--out", str(a)], capsys)
    code_b, _, _ = run(["validate", "--quick", "--out", str(b)], capsys)
    assert code_a == code_b == 0
    assert a.read_bytes() == b.read_bytes()
    assert table.count("PASS") == 8
    assert json.loads((tmp_path / "a.jsonl.manifest.json").read_text())["config"]["tier"] == "quick"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hardwall", "lemma-sum", "--n", "3"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and json.loads(proc.stdout)["upper"] == 22
    proc = subprocess.run([sys.executable, "-m", "hardwall", "--version"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0 and "hardwall" in proc.stdout


def test_validate_failure_exits_two(monkeypatch, capsys):
    from hardwall import validation

    def broken(tier, seed):
        return validation.Check("broken", False, "always fails")

    monkeypatch.setattr(validation, "CHECKS", {"broken": broken})
    code, _, err = run(["validate", "--quick"], capsys)
    assert code == 2 and "FAIL  broken" in err
