import csv
import json
import subprocess
import sys

import pytest

from obl.policy import Policy


def run(*args, cwd=None):
    proc = subprocess.run([sys.executable, "-m", "obl.cli", *map(str, args)], capture_output=True, text=True,
                          cwd=cwd)
    return proc.returncode, proc.stdout, proc.stderr


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_solve_toy_writes_one_policy_per_level(tmp_path):
    out = tmp_path / "solve"
    code, stdout, _ = run("solve", "--env", "toy_game", "--levels", 4, "--T", 0, "--out", out)
    assert code == 0
    assert sorted(p.name for p in (out / "policies").glob("*level?.json")) == [
        f"obl-level{k}.json" for k in range(1, 5)]
    assert "5.000000" in stdout.splitlines()[2]
    for d in ("policies", "beliefs", "reports", "curves"):
        assert (out / d).is_dir()
    man = manifest(out)
    assert all((out / rel).exists() for rel in man["outputs"])
    assert "policies/obl-level1.json" in man["outputs"]


def test_solve_matrix_reports_tie_broken_equilibrium(tmp_path):
    code, stdout, _ = run("solve", "--env", "matrix_coord", "--T", 0, "--out", tmp_path / "m")
    assert code == 0
    assert "1.000000" in stdout and "{'0': 1.0}" in stdout


def test_solve_is_byte_identical_on_rerun(tmp_path):
    for name in ("a", "b"):
        assert run("solve", "--env", "toy_game", "--levels", 2, "--T", 0.5, "--seed", 3,
                   "--out", tmp_path / name)[0] == 0
    for p in (tmp_path / "a" / "policies").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / "policies" / p.name).read_bytes()


def test_bad_config_names_the_key(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("env:\n  name: mini_hanabi\n  hand_sise: 2\n")
    code, _, err = run("solve", "--config", cfg, "--out", tmp_path / "x")
    assert code == 2 and "hand_sise" in err
    cfg.write_text("env: [unclosed\n")
    code, _, err = run("solve", "--config", cfg, "--out", tmp_path / "x")
    assert code == 2 and "error" in err


def test_missing_env_is_usage_error(tmp_path):
    code, _, err = run("solve", "--out", tmp_path / "x")
    assert code == 2 and "--env" in err


def test_train_lbobl_toy_has_oracle_column(tmp_path):
    out = tmp_path / "t"
    code, stdout, _ = run("train", "--env", "toy_game", "--mode", "lbobl", "--episodes", 20_000,
                          "--belief-episodes", 5000, "--out", out)
    assert code == 0
    rows = list(csv.DictReader(open(out / "curves" / "lbobl-level1.csv")))
    assert rows and "oracle_distance" in rows[0]
    assert float(rows[-1]["oracle_distance"]) <= 0.05
    assert (out / "beliefs" / "belief-level1.json").exists()
    assert "SP value 5.000000" in stdout


def test_train_qobl_toy(tmp_path):
    out = tmp_path / "q"
    code, stdout, _ = run("train", "--env", "toy_game", "--mode", "qobl", "--episodes", 20_000, "--out", out)
    assert code == 0 and "SP value 5.000000" in stdout
    pol = Policy.load(out / "policies" / "qobl-level1.json")
    assert pol.metadata["level"] == 1


def test_train_is_reproducible(tmp_path):
    for name in ("a", "b"):
        assert run("train", "--env", "toy_game", "--mode", "qobl", "--episodes", 3000, "--seed", 11,
                   "--out", tmp_path / name)[0] == 0
    for p in (tmp_path / "a" / "policies").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / "policies" / p.name).read_bytes()


def test_warm_start_records_lineage(tmp_path):
    l1, l2 = tmp_path / "l1", tmp_path / "l2"
    common = ["--env", "mini_hanabi", "--preset", "micro", "--mode", "lbobl", "--episodes", 300,
              "--belief-episodes", 300]
    assert run("train", *common, "--out", l1)[0] == 0
    code, _, err = run("train", *common, "--level", 2, "--warm-start", l1, "--out", l2)
    assert code == 0, err
    man = manifest(l2)
    assert man["lineage"]["parent_policy"].endswith("lbobl-level1.json")
    assert any(k.endswith("lbobl-level1.json") for k in man["inputs"])


def test_level_two_without_parent_is_usage_error(tmp_path):
    code, _, _ = run("train", "--env", "toy_game", "--level", 2, "--out", tmp_path / "x")
    assert code == 2


def test_eval_obl_copies_all_five(tmp_path):
    out = tmp_path / "s"
    assert run("solve", "--env", "toy_game", "--levels", 1, "--out", out)[0] == 0
    pol = out / "policies" / "obl-level1.json"
    code, _, _ = run("eval", "--env", "toy_game", pol, pol, pol, "--exact", "--out", tmp_path / "e")
    assert code == 0
    rows = list(csv.reader(open(tmp_path / "e" / "reports" / "crossplay.csv")))
    assert all(float(v) == 5.0 for r in rows[1:] for v in r[1:])


def test_baseline_sp_checkerboard(tmp_path):
    out = tmp_path / "sp"
    code, stdout, _ = run("baseline", "--env", "toy_game", "--kind", "sp", "--seeds", 4, "--out", out)
    assert code == 0
    rows = list(csv.reader(open(out / "reports" / "crossplay.csv")))
    vals = {abs(float(v)) for r in rows[1:] for v in r[1:]}
    assert vals <= {10.0, 0.5, 1.0, 5.0} and 10.0 in vals


def test_eval_grounded_report(tmp_path):
    out = tmp_path / "s"
    assert run("solve", "--env", "mini_hanabi", "--preset", "micro", "--levels", 1, "--out", out)[0] == 0
    code, _, _ = run("eval", "--env", "mini_hanabi", "--preset", "micro", out / "policies" / "obl-level1.json",
                     "--grounded-report", "--episodes", 500, "--out", tmp_path / "g")
    assert code == 0
    data = json.loads((tmp_path / "g" / "reports" / "grounded.json").read_text())
    (agent,) = data["agents"].values()
    assert len(agent["fractions"]) == 4


def test_eval_rejects_policy_from_other_env(tmp_path):
    out = tmp_path / "s"
    assert run("solve", "--env", "toy_game", "--levels", 1, "--out", out)[0] == 0
    code, _, err = run("eval", "--env", "matrix_coord", out / "policies" / "obl-level1.json",
                       "--exact", "--out", tmp_path / "e")
    assert code == 2 and err


def test_verify_single_suite(tmp_path):
    code, stdout, _ = run("verify", "lemma2", "--seed", 7, "--out", tmp_path / "v")
    assert code == 0 and "PASS" in stdout
    assert json.loads((tmp_path / "v" / "reports" / "verify-lemma2.json").read_text())["passed"]


def test_verify_unknown_suite(tmp_path):
    code, _, err = run("verify", "bogus-suite", "--out", tmp_path / "v")
    assert code == 2 and "bogus-suite" in err


def test_budget_exceeded_exit_code(tmp_path):
    code, _, err = run("solve", "--env", "mini_hanabi", "--preset", "micro", "--budget", 10, "--out", tmp_path / "x")
    assert code == 3 and err


def test_belief_dump_is_json():
    code, stdout, _ = run("belief", "--env", "toy_game", "--player", 1)
    assert code == 0
    data = json.loads(stdout)
    assert len(data) == 4


def test_diff_of_same_file_is_zero(tmp_path):
    out = tmp_path / "s"
    assert run("solve", "--env", "toy_game", "--levels", 1, "--out", out)[0] == 0
    pol = out / "policies" / "obl-level1.json"
    code, stdout, _ = run("diff", pol, pol)
    assert code == 0 and json.loads(stdout)["max_tv"] == 0.0


@pytest.mark.slow
def test_verify_all_exits_zero(tmp_path):
    code, stdout, _ = run("verify", "all", "--seed", 7, "--out", tmp_path / "v")
    assert code == 0
    assert len(list((tmp_path / "v" / "reports").glob("verify-*.json"))) == 6
