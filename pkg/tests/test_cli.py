import csv
import io
import json
import subprocess
import sys

import pytest

from steinhaus_lab.cli import main, parse_config


def run_cli(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def digests(tmp_path, argv, tag):
    out = tmp_path / tag
    assert main(argv + ["--out", str(out)]) == 0
    return json.loads((out / "manifest.json").read_text())["files"]


def test_parse_examples():
    args = parse_config(["sample", "--profile", "geometric:q=0.5,N=200", "--seed", "1"])
    assert args.profile.count == 200 and args.seed == 1
    args = parse_config(["verify", "--lemma", "diagonal", "--p", "2"])
    assert args.lemma == "diagonal" and args.p == [2.0]
    assert parse_config(["verify-lemma", "cochran"]).lemma == "cochran"


def test_invalid_profile_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        parse_config(["sample", "--profile", "power:beta=0"])
    assert exc.value.code == 2


def test_missing_lemma_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        parse_config(["verify"])
    assert exc.value.code == 2


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nprofile = dyadic:counts=n,N=50\nseed = 7\nstrict = true\n")
    args = parse_config(["sample", "--config", str(cfg)])
    assert args.profile.count == 50 and args.seed == 7 and args.strict
    args = parse_config(["sample", "--config", str(cfg), "--seed", "3"])
    assert args.seed == 3 and args.profile.count == 50


def test_unknown_config_key_exits_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(SystemExit) as exc:
        parse_config(["sample", "--config", str(cfg)])
    assert exc.value.code == 2


def test_sample_csv(capsys):
    code, io_ = run_cli(["sample", "--profile", "geometric:q=0.5,N=20", "--seed", "1"], capsys)
    lines = io_.out.splitlines()
    assert code == 0 and lines[0] == "n,r,theta,log_inv_B" and len(lines) == 21


def test_sample_json(capsys):
    code, io_ = run_cli(["sample", "--profile", "geometric:q=0.5,N=5", "--format", "json"], capsys)
    d = json.loads(io_.out)
    assert code == 0 and len(d["log_inv_B"]) == 5 and d["seed"] == 0


def test_criteria_and_sweep(capsys):
    code, io_ = run_cli(["criteria", "--profile", "geometric:q=0.5,N=100", "--format", "json", "--strict"], capsys)
    assert code == 0 and json.loads(io_.out)["0"]["verdicts"]["smirnov"] is True
    code, io_ = run_cli(["sweep", "--profile", "dyadic:counts=n,N=60", "--seeds", "3"], capsys)
    rows = list(csv.DictReader(io.StringIO(io_.out)))
    assert code == 0 and [r["seed"] for r in rows] == ["0", "1", "2"]


def test_strict_failing_verdict_exits_1(capsys):
    argv = ["criteria", "--profile", "power:c=1,beta=1,N=100"]
    assert run_cli(argv, capsys)[0] == 0
    assert run_cli(argv + ["--strict"], capsys)[0] == 1


def test_verify_cochran_all_pass(capsys):
    code, io_ = run_cli(["verify-lemma", "cochran", "--mc-samples", "20000", "--strict"], capsys)
    rows = list(csv.DictReader(io.StringIO(io_.out)))
    assert code == 0 and rows and all(r["pass"] == "true" for r in rows)
    assert list(rows[0]) == ["lemma", "p", "r", "s", "method", "estimate", "error", "bound_ref", "ratio", "pass"]


@pytest.mark.parametrize("argv", [
    ["verify", "--lemma", "diagonal", "--p", "2"],
    ["verify", "offdiagonal", "--p", "1"],
    ["verify", "poisson-norm"],
    ["verify", "alpha-lambda", "--measures", "5"],
    ["verify", "rosenthal", "--k", "2", "--p", "2", "--dist", "exponential:1"],
])
def test_verify_batteries_pass(argv, capsys):
    assert run_cli(argv + ["--strict"], capsys)[0] == 0


def test_majorant(capsys):
    code, io_ = run_cli(["majorant", "--profile", "power:c=1,beta=2,N=80", "--format", "json", "--strict"], capsys)
    d = json.loads(io_.out)["0"]
    assert code == 0 and d["valid"] and d["l1_bound_holds"] and len(d["margins"]) == 80


def test_criterion_dist(capsys):
    argv = ["criterion-dist", "--profile", "geometric:q=0.5,N=64", "--seeds", "3", "--checkpoints", "16,32,64",
            "--p", "2"]
    code, io_ = run_cli(argv + ["--strict"], capsys)
    assert code == 0 and io_.out.startswith("profile,p,seed,N,log_x,log_increment")


def test_stolz_cover(capsys):
    argv = ["stolz-cover", "--profile", "dyadic:counts=n,N=500", "--K", "2", "--alpha", "4", "--M", "90"]
    code, io_ = run_cli(argv + ["--strict"], capsys)
    (row,) = csv.DictReader(io.StringIO(io_.out))
    assert code == 0 and float(row["covered_fraction"]) <= 0.5
    assert run_cli(argv + ["--strict", "--min-uncovered", "1.0"], capsys)[0] == 1


def test_carleson_demo(capsys):
    code, io_ = run_cli(["carleson-demo", "--n-max", "20"], capsys)
    rows = list(csv.DictReader(io.StringIO(io_.out)))
    assert code == 0 and len(rows) == 20
    assert all(float(r["naftalevic_product"]) == int(r["n"]) for r in rows)


def test_manifest_contents(tmp_path):
    out = tmp_path / "o"
    assert main(["carleson-demo", "--n-max", "5", "--out", str(out), "--format", "json"]) == 0
    m = json.loads((out / "manifest.json").read_text())
    assert set(m["files"]) == {"carleson.json"} and m["pass"] is True
    assert m["config"]["n_max"] == 5 and "threads" not in m["config"]
    assert m["achieved_errors"]["log_rho_relative_error"] < 1e-10


@pytest.mark.parametrize("argv", [
    ["sample", "--profile", "power:c=1,beta=2,N=300", "--seed", "4"],
    ["criteria", "--profile", "dyadic:counts=n,N=200", "--seeds", "2", "--format", "json"],
    ["majorant", "--profile", "geometric:q=0.5,N=200"],
    ["criterion-dist", "--profile", "geometric:q=0.5,N=128", "--seeds", "2", "--checkpoints", "32,64,128"],
    ["sweep", "--profile", "power:c=1,beta=2,N=150", "--seeds", "2"],
])
def test_digests_stable_across_reruns_and_threads(tmp_path, argv):
    a = digests(tmp_path, argv + ["--threads", "1"], "a")
    b = digests(tmp_path, argv + ["--threads", "1"], "b")
    c = digests(tmp_path, argv + ["--threads", "4"], "c")
    assert a == b == c


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "steinhaus_lab", "sample", "--profile", "power:beta=0,N=10"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "beta" in proc.stderr
