import csv
import json
import os
import subprocess
import sys

import pytest

from isingcoex import cli
from isingcoex.verify import REGISTRY


def run(*args):
    return cli.main([str(a) for a in args])


def test_unknown_config_key_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[measure]\nbeta = 0.1\nfoo = 1\n")
    assert run("exact", "--config", bad, "--out", tmp_path) == 2
    assert "unknown config key" in capsys.readouterr().err


def test_malformed_config_exits_2(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[measure\nbeta = \n")
    assert run("mc", "--config", bad, "--out", tmp_path) == 2


def test_bad_flag_exits_2(tmp_path):
    assert run("mc", "--sampler", "metropolis") == 2
    assert run("exact", "--layers", "[0,", "--out", tmp_path) == 2


def test_verify_appendix_example(tmp_path, capsys):
    assert run("verify", "--check", "appendix", "--instances", 50, "--seed", 7, "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert "PASS appendix" in out
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert report[0]["check_name"] == "appendix" and report[0]["violations"] == 0
    manifest = json.loads((tmp_path / "verify_manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["seed_source"] == "config"
    assert set(manifest["outputs"]) == {"verify_report.json"}


def test_verify_all_runs_the_whole_registry(tmp_path, capsys):
    assert run("verify", "--check", "all", "--instances", 3, "--out", tmp_path) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "checks: " + ", ".join(REGISTRY)
    assert {ln.split()[1] for ln in lines[1:] if ln.startswith(("PASS", "FAIL"))} == set(REGISTRY)


def test_verify_unknown_check(tmp_path):
    assert run("verify", "--check", "fkg,bogus", "--out", tmp_path) == 2


def test_verify_list(capsys):
    assert run("verify", "--list") == 0
    assert capsys.readouterr().out.split() == list(REGISTRY)


def test_exact_command(tmp_path):
    assert run("exact", "--n", 1, "--layers", "[0]", "--beta", 0.2, "--h", 0, "--event-layers", "[0]", "--out", tmp_path) == 0
    res = json.loads((tmp_path / "exact.json").read_text())
    assert res["n_sites"] == 9 and abs(res["event_prob"] - 0.5) < 1e-12


def test_exact_over_cap_exits_2(tmp_path, capsys):
    assert run("exact", "--n", 2, "--out", tmp_path) == 2
    assert "error:" in capsys.readouterr().err


def test_hybrid_command(tmp_path):
    assert run("hybrid", "--config", "configs/example_hybrid.ini", "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "hybrid.csv")))
    assert len(rows) == 25 and list(rows[0]) == ["p", "h", "mu", "dmu_dh", "dmu_dp", "ratio", "flags"]
    assert json.loads((tmp_path / "hybrid.json").read_text())["grid_sup_ratio"] > 0


def test_mc_columns_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("mc", "--n", 3, "--beta", 0.1, "--samples", 30, "--sweeps", 20, "--seed", 4, "--out", d) == 0
    with open(a / "mc_samples.csv") as fh:
        assert next(csv.reader(fh)) == cli.MC_COLUMNS
    for name in ("mc_samples.csv", "mc_summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_mc_no_records(tmp_path):
    assert run("mc", "--n", 2, "--samples", 10, "--sweeps", 5, "--no-records", "--out", tmp_path) == 0
    assert not (tmp_path / "mc_samples.csv").exists()


def test_replay_reproduces_and_detects_tampering(tmp_path, capsys):
    assert run("mc", "--n", 2, "--samples", 20, "--sweeps", 10, "--seed", 1, "--out", tmp_path / "r") == 0
    manifest = tmp_path / "r" / "mc_manifest.json"
    assert run("replay", manifest, "--out", tmp_path / "again") == 0
    assert "reproduced" in capsys.readouterr().out
    m = json.loads(manifest.read_text())
    m["outputs"]["mc_summary.json"] = "0" * 64
    manifest.write_text(json.dumps(m))
    assert run("replay", manifest, "--out", tmp_path / "third") == 1
    assert "MISMATCH mc_summary.json" in capsys.readouterr().out
    assert run("replay", tmp_path / "missing.json") == 2


def test_seed_from_environment_is_recorded(tmp_path):
    env = dict(os.environ, ISINGCOEX_SEED="31")
    cmd = [sys.executable, "-m", "isingcoex.cli", "mc", "--n", "2", "--samples", "5", "--sweeps", "2", "--out", str(tmp_path)]
    subprocess.run(cmd, env=env, check=True, capture_output=True)
    m = json.loads((tmp_path / "mc_manifest.json").read_text())
    assert (m["seed"], m["seed_source"], m["seed_env"]) == (31, "env", "31")


def test_sweep_mixing_and_plots(tmp_path):
    out = tmp_path / "mix"
    cfg = tmp_path / "mix.ini"
    cfg.write_text("[sweep]\nkind = mixing\nbeta_grid = [0.0, 0.2]\nmixing_length = 6\n")
    assert run("sweep", "--config", cfg, "--out", out) == 0
    for sub in ("p1", "p2"):
        assert run("plot", "--kind", "mixing", "--input", out / "mixing.csv", "--out", tmp_path / sub) == 0
    assert (tmp_path / "p1" / "mixing.svg").read_bytes() == (tmp_path / "p2" / "mixing.svg").read_bytes()


def test_plot_gamma_and_bad_input(tmp_path):
    assert run("hybrid", "--config", "configs/example_hybrid.ini", "--out", tmp_path) == 0
    assert run("plot", "--kind", "gamma", "--input", tmp_path / "hybrid.csv", "--out", tmp_path) == 0
    assert (tmp_path / "gamma.svg").read_text().startswith("<?xml")
    assert run("plot", "--kind", "crossing", "--input", tmp_path / "hybrid.csv", "--out", tmp_path) == 2
    assert run("plot", "--kind", "crossing", "--out", tmp_path) == 2


def test_sweep_coexistence_small(tmp_path):
    assert run("sweep", "--kind", "coexistence", "--beta", 0.1, "--h", 0, "--n-list", "[3]", "--samples", 20, "--out", tmp_path) in (0, 1)
    rows = list(csv.DictReader(open(tmp_path / "coexistence.csv")))
    assert rows and "both_span" in rows[0]


def test_binder_needs_two_sizes(tmp_path):
    assert run("sweep", "--kind", "binder", "--n-list", "[2, 3, 4]", "--out", tmp_path) == 2
