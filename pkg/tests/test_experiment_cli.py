"""Scenario loading, the check runner, artifacts, and the simlab CLI."""

import json
import subprocess
import sys
from collections import Counter

import numpy as np
import pytest

from simlab.experiment_cli import (PAPER_EQ_TAGS, PRESETS, ConfigError,
                                   _observable, compare_documents,
                                   load_scenario, main, run_scenario,
                                   write_artifacts)
from simlab.spectral_core import ou_model

SMALL = """\
name = "small"
seed = {seed}
output_dir = "{out}"

[model]
kind = "ou"
n = 1
lam = -1.0

[drift]
kind = "zero"

[[ensembles]]
name = "invariant"
kind = "gaussian_oracle"
count = 4000

[[checks]]
kind = "poincare"
phi = "linear_e1"

[[checks]]
kind = "fernique"
lambdas = [0.05]
"""


def write_config(tmp_path, text, fname="scn.toml"):
    path = tmp_path / fname
    path.write_text(text)
    return str(path)


# ------------------------------------------------------------------- loading

def test_presets_load(tmp_path):
    for name in ("ou", "reaction_diffusion_cubic", "radial", "kernel_poly"):
        scn = load_scenario(name)
        assert scn.name == name
        assert scn.model.zeta_A + scn.spec.zeta_F < 0
    assert load_scenario("ou").zeta_r == -1.0


def test_rejects_nonnegative_zeta(tmp_path):
    bad = """\
name = "bad"
[model]
kind = "ou"
n = 1
lam = -1.0
[drift]
kind = "nemytskii"
b_coeffs = [0.0, 0.0, 0.0, 1.0]
zeta_f = 2.0
"""
    path = write_config(tmp_path, bad)
    with pytest.raises(ConfigError):
        load_scenario(path)
    assert main(["run", path]) == 2


def test_rejects_unknown_check_and_missing_ensemble(tmp_path):
    base = SMALL.format(seed=0, out=tmp_path / "o")
    with pytest.raises(ConfigError):
        load_scenario(write_config(tmp_path, base + "\n[[checks]]\nkind = \"bogus\"\n"))
    dangling = base + "\n[[checks]]\nkind = \"log_sobolev\"\nensemble = \"nope\"\np = [2.0]\n"
    with pytest.raises(ConfigError):
        load_scenario(write_config(tmp_path, dangling, "d.toml"))
    with pytest.raises(ConfigError):
        load_scenario(str(tmp_path / "does_not_exist.toml"))
    assert main(["run", str(tmp_path / "does_not_exist.toml")]) == 2


def test_gibbs_requires_nemytskii_unit_weights(tmp_path):
    cfg = """\
name = "g"
[model]
kind = "dirichlet"
n = 2
beta = 0.5
[drift]
kind = "nemytskii"
b_coeffs = [0.0, 0.0, 0.0, 1.0]
[[ensembles]]
name = "invariant"
kind = "gibbs_ula"
count = 100
"""
    with pytest.raises(ConfigError):
        load_scenario(write_config(tmp_path, cfg))


def test_unknown_observable():
    with pytest.raises(ConfigError):
        _observable(ou_model(1), "cosine_e9")


# -------------------------------------------------------------------- running

def test_empty_check_list_runs_clean(tmp_path):
    cfg = """\
name = "empty"
seed = 3
[model]
kind = "ou"
n = 1
"""
    path = write_config(tmp_path, cfg)
    assert main(["run", path, "--out", str(tmp_path / "out")]) == 0
    doc = json.load(open(tmp_path / "out" / "report.json"))
    assert doc["reports"] == []
    assert doc["exit_code"] == 0


def test_ou_preset_negative_controls_only_failures(tmp_path):
    out = tmp_path / "ou"
    assert main(["run", "ou", "--out", str(out)]) == 0
    doc = json.load(open(out / "report.json"))
    fails = [r for r in doc["reports"] if r["verdict"] == "fail"]
    assert {r["name"] for r in fails} == {"supercontractivity_integrals",
                                          "ultrabounded"}
    assert all(r["expected_failure"] for r in fails)
    for r in doc["reports"]:
        assert r["paper_eq"] in PAPER_EQ_TAGS
    header = (out / "summary.csv").read_text().splitlines()[0]
    assert header == "check,paper_eq,scenario,lhs,lhs_se,rhs,rhs_se,margin,verdict,seed"
    tails = list(out.glob("tail_*.csv"))
    assert len(tails) == 1
    rows = tails[0].read_text().splitlines()
    assert rows[0] == "t,empirical,wilson_hi,bound"
    assert len(rows) == 13


def test_unexpected_failure_exits_one(tmp_path):
    cfg = SMALL.format(seed=0, out=tmp_path / "o") + """
[[checks]]
kind = "supercontractivity"
lambdas = [2.0]
"""
    path = write_config(tmp_path, cfg)
    assert main(["run", path, "--out", str(tmp_path / "o")]) == 1


def test_malformed_thread_env_is_config_error(tmp_path, monkeypatch):
    path = write_config(tmp_path, SMALL.format(seed=0, out=tmp_path / "o"))
    monkeypatch.setenv("SIMLAB_THREADS", "many")
    assert main(["run", path, "--out", str(tmp_path / "o")]) == 2
    monkeypatch.setenv("SIMLAB_THREADS", "2")
    assert main(["run", path, "--out", str(tmp_path / "o")]) == 0


def test_degraded_resolution_exits_three(tmp_path):
    cfg = """\
name = "tiny"
seed = 2
[model]
kind = "ou"
n = 1
[[ensembles]]
name = "invariant"
kind = "gaussian_oracle"
count = 12
[[checks]]
kind = "concentration"
phi = "linear_e1"
"""
    path = write_config(tmp_path, cfg)
    assert main(["run", path, "--out", str(tmp_path / "o")]) == 3
    doc = json.load(open(tmp_path / "o" / "report.json"))
    assert any(r["degraded"] for r in doc["reports"])
    assert not any(r["verdict"] == "fail" for r in doc["reports"])


def test_worker_count_never_changes_bytes(tmp_path):
    scn = load_scenario(write_config(
        tmp_path, SMALL.format(seed=5, out=tmp_path / "w1")))
    rep1, art1 = run_scenario(scn, workers=1)
    rep2, art2 = run_scenario(scn, workers=3)
    write_artifacts(str(tmp_path / "w1"), scn.name, scn.seed, rep1, art1, 0)
    write_artifacts(str(tmp_path / "w3"), scn.name, scn.seed, rep2, art2, 0)
    for fname in ("summary.csv", "report.json"):
        a = (tmp_path / "w1" / fname).read_bytes()
        b = (tmp_path / "w3" / fname).read_bytes()
        assert a == b, fname


# ------------------------------------------------------------------ comparing

def test_compare_seed_shift_no_flips(tmp_path):
    paths = {}
    for seed in (1, 2):
        out = tmp_path / f"s{seed}"
        cfg = write_config(tmp_path, SMALL.format(seed=seed, out=out),
                           f"s{seed}.toml")
        assert main(["run", cfg, "--out", str(out)]) == 0
        paths[seed] = out / "report.json"
    a = json.load(open(paths[1]))
    b = json.load(open(paths[2]))
    diff = compare_documents(a, b)
    assert diff["verdict_flips"] == []
    assert diff["checks_compared"] == 2
    assert len(diff["differing"]) >= 1
    assert compare_documents(a, a) == {"checks_compared": 2, "differing": [],
                                       "verdict_flips": []}
    assert main(["compare", str(paths[1]), str(paths[2])]) == 0


def test_compare_rejects_mismatched_keys(tmp_path):
    out = tmp_path / "one"
    cfg = write_config(tmp_path, SMALL.format(seed=1, out=out))
    main(["run", cfg, "--out", str(out)])
    doc = json.load(open(out / "report.json"))
    shorter = {"reports": doc["reports"][:1]}
    with pytest.raises(ConfigError):
        compare_documents(doc, shorter)
    short_path = tmp_path / "short.json"
    short_path.write_text(json.dumps(shorter))
    assert main(["compare", str(out / "report.json"), str(short_path)]) == 2


# ------------------------------------------------------------------- ll-test

def test_ll_test_subcommand(tmp_path):
    out = tmp_path / "ll"
    rc = main(["ll-test", "--corpus", "n1", "--eps-grid", "0.5", "--mode",
               "descent", "--samples", "1", "--seed", "0", "--out", str(out)])
    assert rc == 0
    doc = json.load(open(out / "report.json"))
    names = Counter(r["name"] for r in doc["reports"])
    assert names["ll_approximation"] == 20
    assert names["ll_gradient_quotient"] == 20
    assert 0 < names["ll_boundedness"] < 20
    assert all(r["verdict"] == "pass" for r in doc["reports"])
    assert all(r["paper_eq"] in PAPER_EQ_TAGS for r in doc["reports"])
    assert main(["ll-test", "--eps-grid", "-1.0", "--out", str(out)]) == 2
    assert main(["ll-test", "--eps-grid", "0.1,nope", "--out", str(out)]) == 2


# -------------------------------------------------------------------- presets

def test_presets_write_dir_round_trip(tmp_path):
    assert main(["presets"]) == 0
    d = tmp_path / "p"
    assert main(["presets", "--write-dir", str(d)]) == 0
    files = sorted(f.name for f in d.glob("*.toml"))
    assert files == ["kernel_poly.toml", "ou.toml", "radial.toml",
                     "reaction_diffusion_cubic.toml"]
    scn = load_scenario(str(d / "ou.toml"))
    assert scn.name == "ou"
    assert scn.checks == load_scenario("ou").checks


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "simlab.experiment_cli",
                           "presets"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "reaction_diffusion_cubic" in proc.stdout
